"""Intrinsic/extrinsic loss split, anomalous-skin-effect scaling, and the
multi-interface loss budget with conditioning diagnostics."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .constants import H_PLANCK, NIOBIUM
from .errors import InvalidInputError, InvalidParameterError, NonPhysicalError, UnderdeterminedError

R_MEAS_CAVITY = 4.60e-3
COLLINEARITY_THRESHOLD = 1e3
UNKNOWNS = ("ma", "ms", "sa", "n_qp")


def intrinsic_q(q_int, q_extr):
    """Q_intr from 1/Q_int = 1/Q_intr + 1/Q_extr; ``q_extr`` may be inf."""
    if not (q_int > 0 and q_extr > 0):
        raise InvalidParameterError("quality factors must be positive")
    if q_extr <= q_int:
        raise NonPhysicalError(f"extrinsic loss exceeds total (Q_extr={q_extr:g} <= Q_int={q_int:g})")
    if np.isinf(q_extr):
        return float(q_int)
    return 1.0 / (1.0 / q_int - 1.0 / q_extr)


def ase_correct(q_extr_classical, omega_cavity, omega_resonator):
    """Extrinsic Q rescaled from classical to anomalous skin effect."""
    if not (omega_cavity > 0 and omega_resonator > 0):
        raise InvalidParameterError("frequencies must be positive")
    return q_extr_classical * (omega_cavity / omega_resonator) ** (1 / 6)


@dataclass(frozen=True)
class ExtrinsicModel:
    """Cavity-wall surface resistance measured at the cavity mode.

    ``q_extr_classical`` maps device ids to extrinsic Q from a classical
    skin-effect simulation.
    """

    r_meas_cavity: float = R_MEAS_CAVITY
    omega_cavity: float = 2 * np.pi * 7.687e9
    q_extr_classical: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.r_meas_cavity > 0 and self.omega_cavity > 0):
            raise InvalidParameterError("r_meas_cavity and omega_cavity must be positive")
        if any(not q > 0 for q in self.q_extr_classical.values()):
            raise InvalidParameterError("extrinsic Q values must be positive")


_EXPONENTS = {"classical": 0.5, "ase": 2.0 / 3.0}


def wall_resistance_at(omega_resonator, model, law="ase"):
    """Wall sheet resistance (ohm/sq) scaled to ``omega_resonator``."""
    if law not in _EXPONENTS:
        raise InvalidParameterError(f"law must be one of {sorted(_EXPONENTS)}")
    if not omega_resonator > 0:
        raise InvalidParameterError("frequency must be positive")
    return model.r_meas_cavity * (omega_resonator / model.omega_cavity) ** _EXPONENTS[law]


def qp_coefficient(alpha, f0, constants=NIOBIUM):
    """Loss per unit quasiparticle density, (alpha / pi D) sqrt(2 / h f0 Delta), in um^3."""
    if not 0 < alpha < 1 or not f0 > 0:
        raise InvalidParameterError("need 0 < alpha < 1 and f0 > 0")
    return alpha / (np.pi * constants.dos_fermi) * np.sqrt(2 / (H_PLANCK * f0 * constants.gap_energy))


@dataclass(frozen=True)
class BudgetSystem:
    """One row per device: effective p-tilde (ppm/nm), qp coefficient (um^3)
    and the observed intrinsic loss 1/Q_intr."""

    device_ids: tuple
    p_ma_eff: np.ndarray
    p_ms_eff: np.ndarray
    p_sa: np.ndarray
    qp_coeff: np.ndarray
    q_intr: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(getattr(self, k), dtype=float)
                for k in ("p_ma_eff", "p_ms_eff", "p_sa", "qp_coeff", "q_intr")]
        n = len(self.device_ids)
        if any(c.shape != (n,) for c in cols):
            raise InvalidInputError("every column needs one entry per device")
        if any(np.any(c < 0) or not np.all(np.isfinite(c)) for c in cols[:4]):
            raise InvalidInputError("participation entries must be finite and non-negative")
        if np.any(cols[4] <= 0):
            raise InvalidInputError("q_intr must be positive (use inf for no loss)")
        for k, c in zip(("p_ma_eff", "p_ms_eff", "p_sa", "qp_coeff", "q_intr"), cols):
            object.__setattr__(self, k, c)
        object.__setattr__(self, "device_ids", tuple(self.device_ids))

    def matrix(self):
        """Design matrix with unknowns in nm (products) and um^-3 (n_qp)."""
        return np.column_stack([self.p_ma_eff * 1e-6, self.p_ms_eff * 1e-6,
                                self.p_sa * 1e-6, self.qp_coeff])

    @property
    def losses(self):
        return 1.0 / self.q_intr


@dataclass(frozen=True)
class BudgetSolution:
    products: dict
    n_qp: float
    condition: float
    residual_norm: float
    method: str
    warnings: tuple = ()

    def as_dict(self):
        return {"t_tan_delta_nm": dict(self.products), "n_qp_um3": self.n_qp,
                "condition_number": self.condition, "residual_norm": self.residual_norm,
                "method": self.method, "warnings": list(self.warnings)}


def scaled_condition(a):
    """2-norm condition number after dividing each column by its largest entry."""
    a = np.asarray(a, dtype=float)
    peak = np.abs(a).max(axis=0)
    peak[peak == 0] = 1.0
    return float(np.linalg.cond(a / peak))


def solve_budget(system, method="direct", threshold=COLLINEARITY_THRESHOLD):
    """Solve the device loss equations for the three interface products and n_qp.

    ``direct`` is an unconstrained least-squares solve, ``nonnegative``
    restricts every unknown to be >= 0. Both report the column-scaled
    condition number and warn above ``threshold``.
    """
    a = system.matrix()
    b = system.losses
    if a.shape[0] < a.shape[1]:
        raise UnderdeterminedError(f"{a.shape[0]} devices for {a.shape[1]} unknowns")
    peak = np.abs(a).max(axis=0)
    peak[peak == 0] = 1.0
    a_s = a / peak
    cond = scaled_condition(a)
    notes = []
    if cond > threshold:
        msg = f"participation columns are nearly collinear (condition {cond:.3g} > {threshold:g})"
        notes.append(msg)
        warnings.warn(msg)
    if method == "direct":
        x_s, *_ = np.linalg.lstsq(a_s, b, rcond=None)
    elif method == "nonnegative":
        # column scaling is positive, so the sign constraint carries over
        s = b.max() if b.max() > 0 else 1.0
        x_s, _ = nnls(a_s, b / s)
        x_s = x_s * s
    else:
        raise InvalidParameterError("method must be 'direct' or 'nonnegative'")
    x = x_s / peak
    resid = float(np.linalg.norm(a @ x - b))
    products = dict(zip(UNKNOWNS[:3], (float(v) for v in x[:3])))
    return BudgetSolution(products, float(x[3]), cond, resid, method, tuple(notes))
