"""Analysis toolkit for superconducting coplanar-stripline resonators.

Modules
-------
trace_fit          reflection model, trace synthesis and resonance fits
tls_model          TLS loss model fits and interface / quasiparticle bounds
field_solver       2D electrostatics: capacitance and participation ratios
inductance_solver  filament partial-inductance extraction and kinetic fraction
regrowth           oxide regrowth forward model, inversion and loss tangent
loss_budget        intrinsic/extrinsic split, ASE scaling, budget solve
io, config, cli    file formats, project config and the command line
"""

__version__ = "0.1.0"

from .constants import NIOBIUM, MaterialConstants
from .errors import CpsLossError
from .field_solver import (CpsGeometry, GridSpec, ParticipationSet, capacitance,
                           capacitance_shift, participation_ratios, solve_cross_section)
from .inductance_solver import (ConductorModel, FilamentSpec, InductanceResult,
                                inductance_matrix, inductance_shift, kinetic_fraction)
from .loss_budget import (BudgetSystem, ExtrinsicModel, ase_correct, intrinsic_q,
                          solve_budget, wall_resistance_at)
from .regrowth import (RegrowthObservation, ShiftSolver, StoichiometryModel,
                       extract_ma_loss_tangent, frequency_shift, invert_thickness,
                       nb_consumption)
from .tls_model import (TlsFitParams, fit_power_sweep, fit_temperature_sweep, interface_bound,
                        low_power_q, quasiparticle_bound, tls_inverse_q)
from .trace_fit import (ReflectionTrace, ResonanceFit, fit_resonance, model_s11,
                        photon_number, synthesize_trace)
