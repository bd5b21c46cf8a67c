"""Single-port reflection model, trace synthesis and resonance fitting.

The reflection of a resonator probed in reflection is

    S11(w) = C exp(i(phi0 + w t_ed)) * (2i(w - w0) - w0/Qext + w0/Qint)
                                     / (2i(w - w0) + w0/Qext + w0/Qint)

with ``w = 2 pi f``. Fits minimize the summed squared complex residual over
all six parameters with a Levenberg-Marquardt loop and an analytic Jacobian.
"""

from dataclasses import dataclass, field

import numpy as np

from ._lm import FTOL, MAX_ITER, XTOL, covariance, levenberg_marquardt
from .constants import HBAR
from .errors import (ConvergenceError, InvalidInputError, InvalidParameterError,
                     NoResonanceError)

PARAM_NAMES = ("f0", "q_int", "q_ext", "baseline_mag", "phase_offset", "electrical_delay")
MIN_POINTS = 16
MIN_SPAN_LINEWIDTHS = 3.0


@dataclass(frozen=True)
class ReflectionTrace:
    frequencies: np.ndarray
    s11: np.ndarray
    applied_power: float = 1e-18
    temperature: float = 0.02
    name: str = ""

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s11, dtype=complex)
        if f.ndim != 1 or f.size < MIN_POINTS:
            raise InvalidInputError(f"need at least {MIN_POINTS} frequency points")
        if s.shape != f.shape:
            raise InvalidInputError("s11 and frequencies differ in length")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(s))):
            raise InvalidInputError("trace contains non-finite values")
        if np.any(np.diff(f) <= 0):
            raise InvalidInputError("frequencies must be strictly increasing")
        if not self.applied_power > 0 or not self.temperature > 0:
            raise InvalidInputError("applied_power and temperature must be positive")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s11", s)


@dataclass(frozen=True)
class ResonanceFit:
    f0: float
    q_int: float
    q_ext: float
    baseline_mag: float = 1.0
    phase_offset: float = 0.0
    electrical_delay: float = 0.0
    covariance: np.ndarray = field(default=None, repr=False, compare=False)
    residual_rms: float = float("nan")

    def __post_init__(self):
        vec = self.as_vector()
        if not np.all(np.isfinite(vec)):
            raise InvalidParameterError("resonance parameters must be finite")
        if min(self.f0, self.q_int, self.q_ext, self.baseline_mag) <= 0:
            raise InvalidParameterError("f0, q_int, q_ext and baseline_mag must be positive")

    def as_vector(self):
        return np.array([self.f0, self.q_int, self.q_ext, self.baseline_mag,
                         self.phase_offset, self.electrical_delay], dtype=float)

    @classmethod
    def from_vector(cls, v, **extra):
        return cls(*(float(x) for x in v), **extra)

    @property
    def q_loaded(self):
        return 1.0 / (1.0 / self.q_int + 1.0 / self.q_ext)

    @property
    def uncertainties(self):
        if self.covariance is None:
            return np.full(6, np.nan)
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def as_dict(self):
        out = {name: float(v) for name, v in zip(PARAM_NAMES, self.as_vector())}
        out.update({f"{name}_sigma": float(s) for name, s in zip(PARAM_NAMES, self.uncertainties)})
        out["residual_rms"] = float(self.residual_rms)
        return out


@dataclass(frozen=True)
class PhotonEstimate:
    n_mean: float
    q_loaded: float


def _parts(p, f):
    f0, qi, qe, c, phi, ted = p
    w = 2 * np.pi * np.asarray(f, dtype=float)
    w0 = 2 * np.pi * f0
    det = 2j * (w - w0)
    a, b = w0 / qe, w0 / qi
    num = det - a + b
    den = det + a + b
    env = c * np.exp(1j * (phi + w * ted))
    return w, w0, a, b, num, den, env


def _model(p, f):
    _, _, _, _, num, den, env = _parts(p, f)
    return env * num / den


def _jacobian(p, f):
    """d S11 / d(f0, q_int, q_ext, C, phi0, t_ed), shape (n, 6) complex."""
    f0, qi, qe, c, phi, ted = p
    w, w0, a, b, num, den, env = _parts(p, f)
    r = num / den
    s = env * r
    den2 = den * den
    dn_dw0 = -2j - 1 / qe + 1 / qi
    dd_dw0 = -2j + 1 / qe + 1 / qi
    jac = np.empty((w.size, 6), dtype=complex)
    jac[:, 0] = env * (dn_dw0 * den - num * dd_dw0) / den2 * 2 * np.pi
    # a = w0/qe, b = w0/qi; dR/db = 2a/den^2, dR/da = -(num + den)/den^2
    jac[:, 1] = env * 2 * a / den2 * (-w0 / qi ** 2)
    jac[:, 2] = env * (num + den) / den2 * (w0 / qe ** 2)
    jac[:, 3] = s / c
    jac[:, 4] = 1j * s
    jac[:, 5] = 1j * w * s
    return jac


def model_s11(params, freq):
    """Evaluate the reflection model at ``freq`` (Hz, scalar or array)."""
    p = params.as_vector() if hasattr(params, "as_vector") else np.asarray(params, float)
    if not np.all(np.isfinite(p)):
        raise InvalidParameterError("non-finite model parameter")
    f = np.asarray(freq, dtype=float)
    if np.any(f <= 0):
        raise InvalidParameterError("frequency must be positive")
    return _model(p, f)


def model_jacobian(params, freq):
    p = params.as_vector() if hasattr(params, "as_vector") else np.asarray(params, float)
    return _jacobian(p, np.atleast_1d(np.asarray(freq, dtype=float)))


def synthesize_trace(params, grid, noise_sigma=0.0, seed=0, applied_power=1e-18,
                     temperature=0.02):
    """Model trace plus complex Gaussian noise (``noise_sigma`` per quadrature)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidInputError("empty frequency grid")
    if not noise_sigma >= 0:
        raise InvalidParameterError("noise_sigma must be >= 0")
    s = model_s11(params, grid)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        s = s + noise_sigma * (rng.standard_normal(grid.size)
                               + 1j * rng.standard_normal(grid.size))
    return ReflectionTrace(grid, s, applied_power=applied_power, temperature=temperature)


def noise_floor(s11, edge_fraction=0.1):
    """Per-quadrature noise estimate from second differences at the trace edges."""
    n = s11.size
    k = max(int(n * edge_fraction), 4)
    d2 = np.concatenate([np.diff(s11[:k], 2), np.diff(s11[-k:], 2)])
    return float(np.sqrt(np.mean(np.abs(d2) ** 2) / 12.0))


def _half_depth_width(f, mag2, i_min, level):
    """Full width at ``level`` around the minimum of ``mag2``, or None."""
    below = mag2 < level
    lo = i_min
    while lo > 0 and below[lo - 1]:
        lo -= 1
    hi = i_min
    while hi < f.size - 1 and below[hi + 1]:
        hi += 1
    if lo == 0 or hi == f.size - 1:
        return None

    def cross(i, j):
        # linear interpolation between sample i (above) and j (below)
        t = (level - mag2[i]) / (mag2[j] - mag2[i])
        return f[i] + t * (f[j] - f[i])

    return cross(hi + 1, hi) - cross(lo - 1, lo)


def initial_guess(trace, edge_fraction=0.1):
    """Reproducible starting point built from the trace alone.

    Baseline magnitude from the edges, f0 at the magnitude minimum, the loaded
    Q from the full width at half depth of |S11|^2, and the coupling split from
    the dip depth. Delay and phase offset come from a linear fit to the
    unwrapped phase once the resonance phase is divided out; the over/under
    coupling branch whose phase is straighter wins.
    """
    f, s = trace.frequencies, trace.s11
    n = f.size
    k = max(int(n * edge_fraction), 4)
    mag = np.abs(s)
    c = float(np.mean(np.concatenate([mag[:k], mag[-k:]])))
    smooth = np.convolve(mag, np.ones(5) / 5, mode="same")
    smooth[:2], smooth[-2:] = mag[:2], mag[-2:]
    i_min = int(np.argmin(smooth))
    sigma = noise_floor(s, edge_fraction)
    prominence = c - smooth[i_min]
    if prominence <= max(3 * sigma, 1e-9 * c):
        raise NoResonanceError(
            f"dip prominence {prominence:.3g} is below 3x noise floor ({3 * sigma:.3g})")
    f0 = float(f[i_min])
    depth = min(mag[i_min] / c, 0.999)
    mag2 = (mag / c) ** 2
    width = _half_depth_width(f, mag2, i_min, 0.5 * (1 + depth ** 2))
    if width is None or not width > 0:
        raise InvalidInputError("trace does not enclose the resonance half-depth points")
    if f[-1] - f[0] < MIN_SPAN_LINEWIDTHS * width:
        raise InvalidInputError(
            f"trace spans {(f[-1] - f[0]) / width:.2g} linewidths, need >= {MIN_SPAN_LINEWIDTHS}")
    q_l = f0 / width
    x = max((1 - depth) / (1 + depth), 1e-3)
    over = (q_l * (1 + 1 / x), q_l * (1 + 1 / x) * x)       # Qe = x Qi
    under = (q_l * (1 + 1 / x) * x, q_l * (1 + 1 / x))      # Qi = x Qe
    w = 2 * np.pi * f
    wc = w - w.mean()
    best = None
    for qi, qe in (over, under):
        r = _model(np.array([f0, qi, qe, 1.0, 0.0, 0.0]), f)
        psi = np.unwrap(np.angle(s / r))
        wt = np.abs(r)
        coef = np.polyfit(wc, psi, 1, w=wt)
        resid = float(np.sum((wt * (psi - np.polyval(coef, wc))) ** 2))
        if best is None or resid < best[0]:
            t_ed = coef[0]
            phi = coef[1] - t_ed * w.mean()
            best = (resid, np.array([f0, qi, qe, c, np.angle(np.exp(1j * phi)), t_ed]))
    return ResonanceFit.from_vector(best[1])


def fit_resonance(trace, initial=None, xtol=XTOL, ftol=FTOL, max_iter=MAX_ITER):
    """Least-squares fit of all six reflection parameters.

    Raises NoResonanceError when the dip does not stand out of the noise and
    ConvergenceError (with ``best`` set) when the optimizer runs out of
    iterations.
    """
    guess = initial_guess(trace) if initial is None else initial
    if initial is not None:
        # still refuse traces without a resonance feature
        initial_guess(trace)
    f, s = trace.frequencies, trace.s11
    p0 = guess.as_vector()
    lw = p0[0] / (1 / (1 / p0[1] + 1 / p0[2]))
    span = 2 * np.pi * (f[-1] - f[0])
    # internal variables of order one
    scale = np.array([lw, p0[1], p0[2], p0[3], 1.0, 1.0 / span])
    offset = np.array([p0[0] - lw, 0.0, 0.0, 0.0, 0.0, p0[5] - 1.0 / span])

    def to_p(u):
        return offset + scale * u

    def residual(u):
        d = _model(to_p(u), f) - s
        return np.concatenate([d.real, d.imag])

    def jacobian(u):
        j = _jacobian(to_p(u), f) * scale
        return np.vstack([j.real, j.imag])

    u0 = (p0 - offset) / scale
    lower = np.array([-np.inf, 1e-9, 1e-9, 1e-9, -np.inf, -np.inf])
    try:
        res = levenberg_marquardt(residual, jacobian, u0, lower=lower, xtol=xtol,
                                  ftol=ftol, max_iter=max_iter)
    except ConvergenceError as exc:
        raise ConvergenceError(str(exc), best=ResonanceFit.from_vector(to_p(exc.best))) from None
    p = to_p(res.x)
    p[4] = np.angle(np.exp(1j * p[4]))
    dof = max(2 * f.size - 6, 1)
    sigma2 = res.cost / dof
    cov_u = covariance(res.jac, sigma2)
    cov = scale[:, None] * cov_u * scale[None, :]
    cov = 0.5 * (cov + cov.T)
    rms = float(np.sqrt(res.cost / f.size))
    return ResonanceFit.from_vector(p, covariance=cov, residual_rms=rms)


def photon_number(fit, applied_power):
    """Mean intracavity photons, n = 4 Ql^2 P / (hbar w0^2 Qext)."""
    if applied_power < 0 or not np.isfinite(applied_power):
        raise InvalidParameterError("applied_power must be >= 0")
    w0 = 2 * np.pi * fit.f0
    q_l = fit.q_loaded
    n = 4 * q_l ** 2 * applied_power / (HBAR * w0 ** 2 * fit.q_ext)
    return PhotonEstimate(n_mean=float(n), q_loaded=float(q_l))


def device_power(applied_power_dbm, line_attenuation_db=0.0):
    """Power at the device plane (W) after a fixed total line attenuation."""
    return 1e-3 * 10 ** ((applied_power_dbm - line_attenuation_db) / 10)
