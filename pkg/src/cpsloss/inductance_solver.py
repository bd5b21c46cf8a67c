"""Partial-inductance extraction for two parallel finite-thickness strips.

Each strip cross-section is split into rectangular filaments running the full
strip length. Partial inductances between filaments use Grover's straight
filament formula evaluated at the exact geometric mean distance (GMD) of the
two rectangles. In the superconducting case every filament also carries the
London kinetic inductance ``mu0 lambda^2 l / A``. All filaments of a strip
share the terminal voltage, and the 2x2 terminal inductance matrix follows
from eliminating the filament currents.

Substrate properties never enter: the magnetic susceptibility of sapphire is
negligible at this level.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .constants import MU_0
from .errors import IllConditionedError, InvalidParameterError, ResolutionError


@dataclass(frozen=True)
class ConductorModel:
    """``kind`` is ``"normal"`` (lossless limit) or ``"superconducting"``."""

    kind: str = "superconducting"
    conductivity: float = None
    london_depth: float = None

    def __post_init__(self):
        if self.kind == "normal":
            if self.london_depth is not None:
                raise InvalidParameterError("normal conductor takes no london_depth")
        elif self.kind == "superconducting":
            if self.conductivity is not None:
                raise InvalidParameterError("superconductor takes no conductivity")
            if self.london_depth is None or self.london_depth < 0:
                raise InvalidParameterError("superconductor needs london_depth >= 0")
        else:
            raise InvalidParameterError(f"unknown conductor kind {self.kind!r}")

    @classmethod
    def normal(cls, conductivity=1e30):
        return cls(kind="normal", conductivity=conductivity)

    @classmethod
    def superconducting(cls, london_depth):
        return cls(kind="superconducting", london_depth=london_depth)


@dataclass(frozen=True)
class FilamentSpec:
    """Filament counts per strip and the geometric grading toward surfaces."""

    nx: int = 60
    ny: int = 12
    growth_x: float = 1.2
    growth_y: float = 1.3
    near_factor: float = 10.0

    def refined(self, factor=1.5):
        return replace(self, nx=int(round(self.nx * factor)), ny=int(round(self.ny * factor)),
                       growth_x=1 + (self.growth_x - 1) / factor,
                       growth_y=1 + (self.growth_y - 1) / factor)


@dataclass(frozen=True)
class InductanceResult:
    l1: float
    l2: float
    m: float
    l_eff: float
    l_per_length: float
    n_filaments: int = 0

    def as_dict(self):
        return {"l1_h": self.l1, "l2_h": self.l2, "m_h": self.m, "l_eff_h": self.l_eff,
                "l_per_length_h_m": self.l_per_length, "n_filaments": self.n_filaments}


def _graded(n, growth):
    """n cell widths on [0, 1], symmetric, finest at both ends."""
    k = np.arange(n)
    sizes = growth ** np.minimum(k, n - 1 - k).astype(float)
    return np.concatenate([[0.0], np.cumsum(sizes / sizes.sum())])


def filaments(geom, spec):
    """Filament rectangles ``(x0, x1, y0, y1)`` and the strip index of each."""
    fx = _graded(spec.nx, spec.growth_x)
    fy = _graded(spec.ny, spec.growth_y) * geom.t_nb
    rects, owner = [], []
    for s, (xl, xr) in enumerate(geom.trace_edges):
        xs = xl + fx * (xr - xl)
        X0, Y0 = np.meshgrid(xs[:-1], fy[:-1])
        X1, Y1 = np.meshgrid(xs[1:], fy[1:])
        rects.append(np.column_stack([X0.ravel(), X1.ravel(), Y0.ravel(), Y1.ravel()]))
        owner.append(np.full(X0.size, s))
    return np.vstack(rects), np.concatenate(owner)


def _f4(x, y):
    """Fourth antiderivative of ln(sqrt(x^2 + y^2)), twice in x and twice in y.

    Written so that it stays C2 across both axes; terms linear in x or y are
    dropped because they cancel in the rectangle differences.
    """
    x2, y2 = x * x, y * y
    r2 = x2 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        at_yx = np.where(x != 0, np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        at_xy = np.where(y != 0, np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
    return (x2 * x * y * at_yx / 6 + x * y2 * y * at_xy / 6 - 25 * x2 * y2 / 48
            - (x2 * x2 - 6 * x2 * y2 + y2 * y2) * lg / 48)


def mean_log_distance(a, b):
    """Exact mean of ln|r_a - r_b| over rectangles ``a`` and ``b`` (row-wise).

    Each row is ``(x0, x1, y0, y1)``; the result is ln of the GMD.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    total = 0.0
    for i, si in ((1, 1), (0, -1)):
        for k, sk in ((1, 1), (0, -1)):
            dx = a[:, i] - b[:, k]
            for j, sj in ((3, 1), (2, -1)):
                for m, sm in ((3, 1), (2, -1)):
                    dy = a[:, j] - b[:, m]
                    total = total + si * sk * sj * sm * _f4(dx, dy)
    area = (a[:, 1] - a[:, 0]) * (a[:, 3] - a[:, 2]) * (b[:, 1] - b[:, 0]) * (b[:, 3] - b[:, 2])
    return total / area


def _log_gmd_matrix(rects, near_factor):
    """ln GMD for every filament pair: exact nearby, harmonic expansion afar."""
    cx = 0.5 * (rects[:, 0] + rects[:, 1])
    cy = 0.5 * (rects[:, 2] + rects[:, 3])
    wx = rects[:, 1] - rects[:, 0]
    wy = rects[:, 3] - rects[:, 2]
    dx = cx[:, None] - cx[None, :]
    dy = cy[:, None] - cy[None, :]
    d2 = dx * dx + dy * dy
    size = np.maximum(np.maximum(wx, wy)[:, None], np.maximum(wx, wy)[None, :])
    near = d2 < (near_factor * size) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        # second-order term of the rectangle average of a harmonic function
        spread = (wx[:, None] ** 2 + wx[None, :] ** 2 - wy[:, None] ** 2 - wy[None, :] ** 2)
        out = 0.5 * np.log(d2) + spread / 24 * (dy * dy - dx * dx) / (d2 * d2)
    ii, jj = np.nonzero(near)
    upper = ii <= jj
    ii, jj = ii[upper], jj[upper]
    # shift each pair to its own origin to keep the 16-term sum well scaled
    a = rects[ii].copy()
    b = rects[jj].copy()
    ox, oy = a[:, 0].copy(), a[:, 2].copy()
    a[:, :2] -= ox[:, None]
    b[:, :2] -= ox[:, None]
    a[:, 2:] -= oy[:, None]
    b[:, 2:] -= oy[:, None]
    vals = mean_log_distance(a, b)
    out[ii, jj] = vals
    out[jj, ii] = vals
    return out


def filament_mutual(length, gmd):
    """Grover's partial inductance of two parallel filaments of equal length."""
    q = length / gmd
    return MU_0 * length / (2 * np.pi) * (np.arcsinh(q) - np.sqrt(1 + 1 / q ** 2) + 1 / q)


def partial_inductance_matrix(geom, model, spec):
    rects, owner = filaments(geom, spec)
    lp = filament_mutual(geom.length, np.exp(_log_gmd_matrix(rects, spec.near_factor)))
    if model.kind == "superconducting" and model.london_depth > 0:
        area = (rects[:, 1] - rects[:, 0]) * (rects[:, 3] - rects[:, 2])
        lp[np.diag_indices_from(lp)] += MU_0 * model.london_depth ** 2 * geom.length / area
    return lp, owner


def _check_resolution(geom, model, spec):
    if geom.t_nb <= 0:
        raise InvalidParameterError("strips need finite thickness")
    if model.kind != "superconducting" or model.london_depth == 0:
        return
    fy = _graded(spec.ny, spec.growth_y) * geom.t_nb
    fx = _graded(spec.nx, spec.growth_x) * geom.width
    if min(fy[1], fx[1]) > model.london_depth / 2:
        raise ResolutionError(
            f"surface filaments ({min(fy[1], fx[1]) * 1e9:.3g} nm) exceed lambda/2 "
            f"({model.london_depth * 0.5e9:.3g} nm)", layer="filaments")


def inductance_matrix(geom, model, f0, filament_spec=None):
    """Terminal inductance matrix of the strip pair under differential drive."""
    spec = filament_spec or FilamentSpec()
    if not (np.isfinite(f0) and f0 > 0):
        raise InvalidParameterError("f0 must be positive")
    _check_resolution(geom, model, spec)
    lp, owner = partial_inductance_matrix(geom, model, spec)
    try:
        chol = sla.cho_factor(lp)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError("filament inductance matrix is not positive definite",
                                  condition=np.inf) from exc
    diag = np.diag(chol[0]) ** 2
    cond_est = float(diag.max() / diag.min())
    if cond_est > 1e14:
        raise IllConditionedError(f"filament system condition ~{cond_est:.3g}",
                                  condition=cond_est)
    incidence = np.zeros((owner.size, 2))
    incidence[np.arange(owner.size), owner] = 1.0
    omega = 2 * np.pi * f0
    # lossless filaments: Z_fil = j w Lp; terminal Z = (B^T Z_fil^-1 B)^-1
    y_term = incidence.T @ sla.cho_solve(chol, incidence) / (1j * omega)
    z = np.linalg.inv(y_term)
    lmat = (z / (1j * omega)).real
    lmat = 0.5 * (lmat + lmat.T)
    l1, l2, m = lmat[0, 0], lmat[1, 1], lmat[0, 1]
    l_eff = l1 + l2 - 2 * m
    return InductanceResult(l1=float(l1), l2=float(l2), m=float(m), l_eff=float(l_eff),
                            l_per_length=float(l_eff / geom.length),
                            n_filaments=int(owner.size))


def kinetic_fraction(geom, f0, lambda_london, filament_spec=None):
    """alpha = (L_sc - L_normal) / L_sc, in (0, 1) for lambda > 0."""
    normal = inductance_matrix(geom, ConductorModel.normal(), f0, filament_spec)
    sc = inductance_matrix(geom, ConductorModel.superconducting(lambda_london), f0,
                           filament_spec)
    return (sc.l_eff - normal.l_eff) / sc.l_eff


def inductance_shift(geom, delta_t_nb, f0, lambda_london, filament_spec=None, baseline=None):
    """Relative L_eff change when the metal thins by ``delta_t_nb``.

    Both runs use the same filament counts; ``baseline`` may pass a cached
    result for the unthinned strips.
    """
    if delta_t_nb < 0 or delta_t_nb >= geom.t_nb:
        raise InvalidParameterError("delta_t_nb must lie in [0, t_nb)")
    model = ConductorModel.superconducting(lambda_london)
    ref = baseline or inductance_matrix(geom, model, f0, filament_spec)
    if delta_t_nb == 0:
        return 0.0
    thin = inductance_matrix(replace(geom, t_nb=geom.t_nb - delta_t_nb), model, f0,
                             filament_spec)
    return (thin.l_eff - ref.l_eff) / ref.l_eff
