"""Nb2O5 regrowth: stoichiometry, the forward frequency-shift model, its
inversion from measured shifts, and metal-air loss tangent extraction.

Only Nb2O5 is assumed to form. Growing ``dt_ma`` of oxide consumes
``beta rho_Nb2O5 dt_ma / rho_Nb`` of metal, where ``beta`` is the Nb mass
fraction of the oxide. The resonance shifts by ``-(gamma_C + gamma_L)/2``
to first order, from ``f ~ 1/sqrt(LC)``.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from .constants import NIOBIUM
from .errors import InvalidInputError, InvalidParameterError, NoRegrowthSignalError
from .field_solver import GridSpec, baseline_capacitance, capacitance_shift
from .inductance_solver import (ConductorModel, FilamentSpec, inductance_matrix,
                                inductance_shift)

SEARCH_BOUNDS_NM = (0.0, 20.0)
DEFAULT_F0 = 5e9


@dataclass(frozen=True)
class StoichiometryModel:
    rho_nb: float = NIOBIUM.rho_nb
    rho_nb2o5: float = NIOBIUM.rho_nb2o5
    a_nb: float = NIOBIUM.a_nb
    a_o: float = NIOBIUM.a_o

    def __post_init__(self):
        if min(self.rho_nb, self.rho_nb2o5, self.a_nb, self.a_o) <= 0:
            raise InvalidParameterError("densities and atomic masses must be positive")

    @classmethod
    def from_constants(cls, constants):
        return cls(constants.rho_nb, constants.rho_nb2o5, constants.a_nb, constants.a_o)

    @property
    def beta_stoich(self):
        """Nb mass fraction of Nb2O5."""
        return 2 * self.a_nb / (2 * self.a_nb + 5 * self.a_o)

    @property
    def consumption_ratio(self):
        """Metal thickness consumed per unit oxide thickness."""
        return self.beta_stoich * self.rho_nb2o5 / self.rho_nb

    def as_dict(self):
        return {"rho_nb_kg_m3": self.rho_nb, "rho_nb2o5_kg_m3": self.rho_nb2o5,
                "a_nb": self.a_nb, "a_o": self.a_o, "beta_stoich": self.beta_stoich,
                "consumption_ratio": self.consumption_ratio}


def nb_consumption(delta_t_ma, model=None):
    """Nb thickness (m) consumed by ``delta_t_ma`` (m) of regrown oxide."""
    if delta_t_ma < 0:
        raise InvalidParameterError("delta_t_ma must be >= 0")
    return (model or StoichiometryModel()).consumption_ratio * delta_t_ma


class ShiftSolver:
    """Field and inductance handles for the regrowth forward model.

    Baseline C and L of every geometry are cached, as are full shift
    evaluations, so repeated calls during an inversion stay cheap. The
    default meshes are coarser than the stand-alone solver defaults; the
    paired-run construction keeps the relative shifts within about 1% of the
    fine-mesh values.
    """

    def __init__(self, grid_spec=None, filament_spec=None, lambda_london=None,
                 stoichiometry=None, t_min=None):
        self.grid_spec = grid_spec or GridSpec(growth=1.25)
        self.filament_spec = filament_spec or FilamentSpec(nx=40, ny=10)
        self.lambda_london = NIOBIUM.london_depth if lambda_london is None else lambda_london
        self.stoichiometry = stoichiometry or StoichiometryModel()
        self.t_min = self.grid_spec.probe_thickness if t_min is None else t_min
        self._c0 = {}
        self._l0 = {}
        self._shifts = {}

    def _f0(self, geom):
        return geom.f0 or DEFAULT_F0

    def gamma_c(self, geom, delta_t_ma):
        if geom not in self._c0:
            self._c0[geom] = baseline_capacitance(geom, self.grid_spec, self.t_min)
        dt_nb = nb_consumption(delta_t_ma, self.stoichiometry)
        return capacitance_shift(geom, delta_t_ma, dt_nb, self.grid_spec, self.t_min,
                                 baseline=self._c0[geom])

    def gamma_l(self, geom, delta_t_ma):
        f0 = self._f0(geom)
        if geom not in self._l0:
            model = ConductorModel.superconducting(self.lambda_london)
            self._l0[geom] = inductance_matrix(geom, model, f0, self.filament_spec)
        dt_nb = nb_consumption(delta_t_ma, self.stoichiometry)
        return inductance_shift(geom, dt_nb, f0, self.lambda_london, self.filament_spec,
                                baseline=self._l0[geom])

    def shift(self, geom, delta_t_ma):
        key = (geom, float(delta_t_ma))
        if key not in self._shifts:
            if delta_t_ma == 0:
                self._shifts[key] = 0.0
            else:
                self._shifts[key] = -0.5 * (self.gamma_c(geom, delta_t_ma)
                                            + self.gamma_l(geom, delta_t_ma))
        return self._shifts[key]

    def curve(self, geom, nodes):
        """Monotone interpolant of the shift over ``nodes`` (m)."""
        nodes = np.unique(np.asarray(nodes, dtype=float))
        return PchipInterpolator(nodes, [self.shift(geom, t) for t in nodes])


def frequency_shift(delta_t_ma, geom, solver=None):
    """Fractional resonance shift df/f after ``delta_t_ma`` (m) of regrowth."""
    if delta_t_ma < 0:
        raise InvalidParameterError("delta_t_ma must be >= 0")
    return (solver or ShiftSolver()).shift(geom, delta_t_ma)


@dataclass(frozen=True)
class RegrowthObservation:
    """One device measured before and after the oxide regrew.

    Upward frequency shifts or Q improvements are allowed but raise a
    data-quality warning.
    """

    device_id: str
    f0_before: float
    f0_after: float
    q_intr_before: Optional[float] = None
    q_intr_after: Optional[float] = None
    p_tilde_ma_eff: Optional[float] = None

    def __post_init__(self):
        if not (self.f0_before > 0 and self.f0_after > 0):
            raise InvalidInputError(f"{self.device_id}: frequencies must be positive")
        if self.f0_after > self.f0_before:
            warnings.warn(f"{self.device_id}: resonance moved up after regrowth")
        if self.q_intr_before is not None and self.q_intr_after is not None:
            if self.q_intr_after > self.q_intr_before:
                warnings.warn(f"{self.device_id}: Q_intr improved after regrowth")

    @property
    def fractional_shift(self):
        return (self.f0_after - self.f0_before) / self.f0_before


@dataclass(frozen=True)
class ThicknessEstimate:
    delta_t_ma: float
    sigma: float
    residual_rms: float
    device_ids: tuple
    at_bound: bool = False

    def as_dict(self):
        return {"delta_t_ma_nm": self.delta_t_ma * 1e9, "sigma_nm": self.sigma * 1e9,
                "residual_rms": self.residual_rms, "devices": list(self.device_ids),
                "at_search_bound": self.at_bound}


def invert_thickness(observations, geom_map, solver=None, surrogate_nodes=None):
    """Single shared oxide thickness that best explains the measured shifts.

    Minimizes the summed squared difference between measured and modelled
    df/f with a bounded scalar search over 0-20 nm. With
    ``surrogate_nodes`` (m) each device's forward curve is tabulated once
    and interpolated, which makes repeated inversions cheap. The 1 sigma
    uncertainty comes from the quadratic expansion of the cost, using the
    residual variance; it is NaN for a single device.
    """
    obs = list(observations)
    if not obs:
        raise InvalidInputError("no observations")
    measured = np.array([o.fractional_shift for o in obs])
    if not np.any(measured < 0):
        raise NoRegrowthSignalError("no device shows a downward frequency shift")
    missing = [o.device_id for o in obs if o.device_id not in geom_map]
    if missing:
        raise InvalidInputError(f"no geometry for devices {missing}")
    solver = solver or ShiftSolver()
    geoms = [geom_map[o.device_id] for o in obs]
    if surrogate_nodes is not None:
        curves = {g: solver.curve(g, surrogate_nodes) for g in set(geoms)}

        def model(g, t):
            return float(curves[g](t))
    else:
        def model(g, t):
            return solver.shift(g, t)

    def cost(t_nm):
        t = t_nm * 1e-9
        pred = np.array([model(g, t) for g in geoms])
        return float(np.sum((pred - measured) ** 2))

    lo, hi = SEARCH_BOUNDS_NM
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-4})
    t_nm = float(res.x)
    h = 0.05
    left = max(t_nm - h, 0.0)
    slopes = np.array([(model(g, (t_nm + h) * 1e-9) - model(g, left * 1e-9)) / ((t_nm + h - left) * 1e-9)
                       for g in geoms])
    n = len(obs)
    sigma = float(np.sqrt(res.fun / (n - 1) / np.sum(slopes ** 2))) if n > 1 else float("nan")
    at_bound = t_nm > hi - 0.01 or t_nm < lo + 0.01
    if at_bound:
        warnings.warn("best-fit thickness sits at the edge of the search interval")
    return ThicknessEstimate(delta_t_ma=t_nm * 1e-9, sigma=sigma,
                             residual_rms=float(np.sqrt(res.fun / n)),
                             device_ids=tuple(o.device_id for o in obs), at_bound=at_bound)


@dataclass(frozen=True)
class LossTangentResult:
    per_device: dict
    mean: float
    stderr: float
    flagged: tuple = field(default=())

    def as_dict(self):
        return {"per_device": dict(self.per_device), "mean": self.mean,
                "stderr": self.stderr, "negative_devices": list(self.flagged)}


def extract_ma_loss_tangent(observations, delta_t_ma):
    """Metal-air loss tangent from the intrinsic-loss increase of each device.

    tan(delta_MA) = (1/Q_after - 1/Q_before) / (p_ma_eff dt_ma), with
    ``p_tilde_ma_eff`` in ppm/nm and ``delta_t_ma`` in m. The average is
    unweighted and the spread is the standard error over devices. Negative
    values are kept and listed in ``flagged``.
    """
    if not delta_t_ma > 0:
        raise InvalidParameterError("delta_t_ma must be positive")
    obs = list(observations)
    if not obs:
        raise InvalidInputError("no observations")
    per = {}
    for o in obs:
        if None in (o.q_intr_before, o.q_intr_after, o.p_tilde_ma_eff):
            raise InvalidInputError(f"{o.device_id}: needs both Q values and p_tilde_ma_eff")
        d_loss = 1 / o.q_intr_after - 1 / o.q_intr_before
        per[o.device_id] = d_loss / (o.p_tilde_ma_eff * 1e-6 * delta_t_ma * 1e9)
    flagged = tuple(k for k, v in per.items() if v < 0)
    if flagged:
        warnings.warn(f"negative loss tangent for {list(flagged)}")
    vals = np.array(sorted(per.values()))
    stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return LossTangentResult(per, float(vals.mean()), stderr, flagged)
