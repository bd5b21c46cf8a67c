"""Two-level-system loss model, its power and temperature fits, and the
upper bounds it implies for interface loss and quasiparticle density.

The internal loss is

    1/Q = A / (1 + n/n_c)**beta * tanh(hbar w / 2 k_B T) + 1/Q_r

with ``A = F_TLS tan(delta_TLS)``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._lm import covariance, levenberg_marquardt
from .constants import H_PLANCK, HBAR, K_B, NIOBIUM
from .errors import (ConvergenceError, EmptySelectionError, IllPosedFitError,
                     InvalidParameterError)

BETA_BOUNDS = (0.1, 2.0)
BETA_START = 0.5
MIN_POWER_POINTS = 6
MIN_DYNAMIC_RANGE = 100.0
MIN_TEMPERATURES = 5
MIN_TANH_VARIATION = 0.10


@dataclass(frozen=True)
class TlsFitParams:
    """Parameters of the TLS loss model.

    ``f_tls_tan_delta`` may be exactly zero when a fit resolves no
    power-dependent loss; every other field is strictly positive.
    """

    f_tls_tan_delta: float
    n_c: float
    beta_pow: float
    q_r: float

    def __post_init__(self):
        vals = (self.f_tls_tan_delta, self.n_c, self.beta_pow, self.q_r)
        if not all(np.isfinite(v) for v in vals[:3]) or np.isnan(self.q_r):
            raise InvalidParameterError("TLS parameters must be finite")
        if self.f_tls_tan_delta < 0 or self.n_c <= 0 or self.q_r <= 0:
            raise InvalidParameterError("TLS parameters must be positive")
        if not 0 < self.beta_pow <= 2:
            raise InvalidParameterError("beta_pow must lie in (0, 2]")

    def as_vector(self):
        return np.array([self.f_tls_tan_delta, self.n_c, self.beta_pow, self.q_r])

    def as_dict(self):
        return {"f_tls_tan_delta": self.f_tls_tan_delta, "n_c": self.n_c,
                "beta_pow": self.beta_pow, "q_r": self.q_r}


@dataclass(frozen=True)
class PowerSweepFit:
    params: TlsFitParams
    covariance: np.ndarray = field(repr=False)
    degenerate: bool
    residual_rms: float
    weighted: bool

    @property
    def uncertainties(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))


@dataclass(frozen=True)
class TemperatureSweepFit:
    """``covariance`` is over (saturated_tls_loss, q_r)."""

    saturated_tls_loss: float
    q_r: float
    covariance: np.ndarray = field(repr=False)
    weighted: bool

    @property
    def uncertainties(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))


def thermal_factor(temperature, f0):
    """tanh(hbar w / 2 k_B T)."""
    return np.tanh(HBAR * 2 * np.pi * f0 / (2 * K_B * np.asarray(temperature, dtype=float)))


def _check_domain(n, temperature, f0):
    if np.any(np.asarray(n) < 0):
        raise InvalidParameterError("photon number must be >= 0")
    if np.any(np.asarray(temperature) <= 0) or not f0 > 0:
        raise InvalidParameterError("temperature and f0 must be positive")


def tls_inverse_q(params, n, temperature, f0):
    """Total internal loss 1/Q at photon number ``n`` and temperature."""
    _check_domain(n, temperature, f0)
    n = np.asarray(n, dtype=float)
    sat = (1 + n / params.n_c) ** (-params.beta_pow)
    return params.f_tls_tan_delta * sat * thermal_factor(temperature, f0) + 1 / params.q_r


def tls_gradient(params, n, temperature, f0):
    """d(1/Q) / d(f_tls_tan_delta, n_c, beta_pow, q_r), last axis of length 4."""
    _check_domain(n, temperature, f0)
    n = np.asarray(n, dtype=float)
    a, nc, beta, qr = params.as_vector()
    th = thermal_factor(temperature, f0)
    base = 1 + n / nc
    sat = base ** (-beta)
    g = np.stack(np.broadcast_arrays(
        sat * th,
        a * th * beta * n / nc ** 2 * base ** (-beta - 1),
        -a * th * sat * np.log(base),
        np.full_like(sat * th, -1 / qr ** 2)), axis=-1)
    return g


def _columns(points, names):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise IllPosedFitError(f"expected rows of ({', '.join(names)}[, sigma])")
    sigma = arr[:, 2] if arr.shape[1] == 3 else None
    return arr[:, 0], arr[:, 1], sigma


def _loss_weights(q, q_sigma):
    """Per-point sigma of 1/q, or None for uniform weighting."""
    if q_sigma is None:
        return None
    if np.any(~np.isfinite(q_sigma)) or np.any(q_sigma <= 0):
        warnings.warn("non-positive q sigma present; using uniform weights")
        return None
    return q_sigma / q ** 2


def _start(n, loss):
    order = np.argsort(n)
    n, loss = n[order], loss[order]
    lr = max(float(loss[-1]), 1e-3 * float(loss.mean()))
    a = max(float(loss[0]) - lr, 0.0)
    nc = float(np.sqrt(max(n[0], 1e-12) * n[-1]))
    if a > 0:
        y = (loss - lr) / a
        # (1 + n/nc)^-0.5 = 1/2 at n = 3 nc
        idx = np.nonzero(y < 0.5)[0]
        if idx.size and idx[0] > 0:
            i = idx[0]
            ln = np.log(np.maximum(n[i - 1:i + 1], 1e-12))
            t = (0.5 - y[i - 1]) / (y[i] - y[i - 1])
            nc = float(np.exp(ln[0] + t * (ln[1] - ln[0]))) / 3
    return a, max(nc, 1e-12), BETA_START, lr


def fit_power_sweep(points, f0, temperature):
    """Fit all four TLS parameters to (n, q_int[, q_int_sigma]) rows at fixed T.

    Points carrying a sigma column are inverse-variance weighted and the
    covariance is absolute; otherwise weights are uniform and the
    covariance is scaled by the residual variance. ``degenerate`` is set
    when n_c is not identified (its standard deviation exceeds its value).
    """
    n, q, q_sigma = _columns(points, ("n", "q_int"))
    if n.size < MIN_POWER_POINTS:
        raise IllPosedFitError(f"need >= {MIN_POWER_POINTS} points, got {n.size}")
    _check_domain(n, temperature, f0)
    if np.any(q <= 0):
        raise IllPosedFitError("q_int values must be positive")
    if n.max() < MIN_DYNAMIC_RANGE * n.min():
        raise IllPosedFitError(
            f"photon numbers span {n.max() / max(n.min(), 1e-300):.3g}x, need >= {MIN_DYNAMIC_RANGE:g}x")
    order = np.lexsort((q, n))
    n, q = n[order], q[order]
    q_sigma = None if q_sigma is None else q_sigma[order]
    loss = 1 / q
    sig = _loss_weights(q, q_sigma)
    weighted = sig is not None
    if not weighted:
        sig = np.full_like(loss, loss.mean())
    th = float(thermal_factor(temperature, f0))
    a0, nc0, b0, lr0 = _start(n, loss)
    sa = a0 if a0 > 0 else 1e-3 * loss.mean()
    sl = lr0

    def to_params(u):
        return u[0] * sa, np.exp(u[1]), u[2], u[3] * sl

    def residual(u):
        a, nc, beta, lr = to_params(u)
        return (a * th * (1 + n / nc) ** (-beta) + lr - loss) / sig

    def jacobian(u):
        a, nc, beta, lr = to_params(u)
        base = 1 + n / nc
        sat = base ** (-beta)
        cols = [sa * th * sat,
                a * th * beta * (n / nc) * base ** (-beta - 1),
                -a * th * sat * np.log(base),
                np.full_like(n, sl)]
        return np.column_stack(cols) / sig[:, None]

    u0 = np.array([a0 / sa, np.log(nc0), b0, lr0 / sl])
    lower = [0.0, -np.inf, BETA_BOUNDS[0], 1e-12]
    upper = [np.inf, np.inf, BETA_BOUNDS[1], np.inf]
    try:
        res = levenberg_marquardt(residual, jacobian, u0, lower=lower, upper=upper)
    except ConvergenceError as exc:
        best = to_params(exc.best)
        raise ConvergenceError(str(exc), best=TlsFitParams(best[0], best[1], best[2],
                                                           1 / best[3])) from None
    a, nc, beta, lr = to_params(res.x)
    dof = max(n.size - 4, 1)
    sigma2 = 1.0 if weighted else res.cost / dof
    cov_u = covariance(res.jac, sigma2)
    # chain rule from internal variables to (A, n_c, beta, q_r)
    d = np.array([sa, nc, 1.0, -sl / lr ** 2])
    with np.errstate(invalid="ignore"):
        cov = d[:, None] * cov_u * d[None, :]
    cov[np.isnan(cov)] = np.inf
    var_nc = cov[1, 1]
    degenerate = bool(not np.isfinite(var_nc) or np.sqrt(var_nc) > nc or a == 0)
    model = a * th * (1 + n / nc) ** (-beta) + lr
    rms = float(np.sqrt(np.mean((model - loss) ** 2)))
    return PowerSweepFit(TlsFitParams(float(a), float(nc), float(beta), float(1 / lr)),
                         cov, degenerate, rms, weighted)


def fit_temperature_sweep(points, f0):
    """Two-parameter fit 1/q_intr = A tanh(hbar w / 2 k_B T) + 1/Q_r.

    ``points`` are (T, q_intr[, q_intr_sigma]) rows taken at one low power.
    """
    t, q, q_sigma = _columns(points, ("temperature", "q_intr"))
    if np.unique(t).size < MIN_TEMPERATURES:
        raise IllPosedFitError(f"need >= {MIN_TEMPERATURES} distinct temperatures")
    _check_domain(0.0, t, f0)
    th = thermal_factor(t, f0)
    if (th.max() - th.min()) < MIN_TANH_VARIATION * th.max():
        raise IllPosedFitError("temperature span too small: thermal factor varies < 10%")
    loss = 1 / q
    sig = _loss_weights(q, q_sigma)
    weighted = sig is not None
    w = 1 / sig if weighted else np.ones_like(loss)
    x = np.column_stack([th, np.ones_like(th)])
    coef, *_ = np.linalg.lstsq(x * w[:, None], loss * w, rcond=None)
    resid = (x @ coef - loss) * w
    sigma2 = 1.0 if weighted else float(resid @ resid) / max(t.size - 2, 1)
    cov_lin = covariance(x * w[:, None], sigma2)
    a, lr = coef
    if lr <= 0:
        warnings.warn("fitted residual loss is non-positive; q_r reported as inf")
        q_r = np.inf
        d = np.array([1.0, 0.0])
    else:
        q_r = 1 / lr
        d = np.array([1.0, -q_r ** 2])
    cov = d[:, None] * cov_lin * d[None, :]
    return TemperatureSweepFit(float(a), float(q_r), cov, weighted)


def low_power_q(points, n_c):
    """Mean q_int over the points with n < n_c."""
    arr = np.asarray(points, dtype=float)
    sel = arr[:, 1][arr[:, 0] < n_c]
    if sel.size == 0:
        raise EmptySelectionError(f"no points below n_c = {n_c:g}")
    return float(sel.mean())


def interface_bound(f_tls_tan_delta, p_tilde):
    """Upper bound on t_i tan(delta_i) in nm, with ``p_tilde`` in ppm/nm."""
    if not (f_tls_tan_delta > 0 and p_tilde > 0):
        raise InvalidParameterError("inputs must be positive")
    return f_tls_tan_delta / (p_tilde * 1e-6)


def quasiparticle_bound(q_r, alpha, f0, constants=NIOBIUM):
    """Upper bound on the quasiparticle density (um^-3)."""
    if not 0 < alpha < 1:
        raise InvalidParameterError("alpha must lie in (0, 1)")
    if not (q_r > 0 and f0 > 0):
        raise InvalidParameterError("q_r and f0 must be positive")
    return (np.pi / alpha) * np.sqrt(H_PLANCK * f0 * constants.gap_energy / 2) \
        * constants.dos_fermi / q_r


def bounds_table(f_tls_tan_delta, f_tls_sigma, participation, q_r, q_r_sigma, alpha, f0,
                 constants=NIOBIUM, literature_tan_delta=None):
    """Rows (interface, bound, uncertainty, unit) for MA, MS, SA and n_qp.

    ``participation`` maps "ma", "ms", "sa" to effective p-tilde values in
    ppm/nm. Uncertainties are 1 sigma, propagated from the fitted inputs.
    When ``literature_tan_delta`` gives a loss tangent for an interface, the
    row also carries the implied thickness bound in nm.
    """
    rel = f_tls_sigma / f_tls_tan_delta
    rows = []
    for key in ("ma", "ms", "sa"):
        b = interface_bound(f_tls_tan_delta, participation[key])
        row = {"interface": key.upper(), "bound": b, "uncertainty": b * rel, "unit": "nm"}
        tan_d = (literature_tan_delta or {}).get(key)
        if tan_d:
            row["thickness_bound_nm"] = b / tan_d
            row["thickness_uncertainty_nm"] = b * rel / tan_d
        rows.append(row)
    nqp = quasiparticle_bound(q_r, alpha, f0, constants)
    rows.append({"interface": "n_qp", "bound": nqp, "uncertainty": nqp * q_r_sigma / q_r,
                 "unit": "um^-3"})
    return rows
