"""Physical constants and Nb material defaults.

CODATA values come from :mod:`scipy.constants`. The niobium numbers are
literature estimates supplied as defaults; every report that uses them
echoes the values and flags them as externally sourced.
"""

from dataclasses import asdict, dataclass

from scipy import constants as _c

HBAR = _c.hbar
H_PLANCK = _c.h
K_B = _c.k
MU_0 = _c.mu_0
EPS_0 = _c.epsilon_0
E_CHARGE = _c.e

MEV = 1e-3 * E_CHARGE


@dataclass(frozen=True)
class MaterialConstants:
    """Material inputs for the quasiparticle bound and the regrowth model.

    Attributes
    ----------
    gap_energy : float
        Nb superconducting gap (J).
    dos_fermi : float
        Single-spin density of states at the Fermi level (states / J / um^3).
        The default is the bare band value from the Nb specific-heat
        coefficient, about 0.83 states/(eV atom spin), times the atomic
        density 5.555e10 um^-3.
    london_depth : float
        London penetration depth (m).
    rho_nb, rho_nb2o5 : float
        Mass densities (kg/m^3).
    a_nb, a_o : float
        Standard atomic weights.
    eps_interface : float
        Relative permittivity assigned to interface layers.
    """

    gap_energy: float = 1.55 * MEV
    dos_fermi: float = 4.6e10 / E_CHARGE
    london_depth: float = 39e-9
    rho_nb: float = 8570.0
    rho_nb2o5: float = 4600.0
    a_nb: float = 92.906
    a_o: float = 15.999
    eps_interface: float = 10.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.eps_interface < 1:
            raise ValueError("eps_interface must be >= 1")

    def provenance(self):
        """Values in report units, tagged with their source."""
        return {
            "gap_energy_mev": self.gap_energy / MEV,
            "dos_fermi_per_ev_um3": self.dos_fermi * E_CHARGE,
            "london_depth_nm": self.london_depth * 1e9,
            "rho_nb_kg_m3": self.rho_nb,
            "rho_nb2o5_kg_m3": self.rho_nb2o5,
            "a_nb": self.a_nb,
            "a_o": self.a_o,
            "eps_interface": self.eps_interface,
            "source": "externally sourced literature/handbook defaults",
        }


NIOBIUM = MaterialConstants()
