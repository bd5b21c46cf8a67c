"""Small Levenberg-Marquardt core shared by the trace and TLS fits."""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

XTOL = 1e-10
FTOL = 1e-12
MAX_ITER = 200


@dataclass
class LmResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    iterations: int


def levenberg_marquardt(residual, jacobian, x0, lower=None, upper=None,
                        xtol=XTOL, ftol=FTOL, max_iter=MAX_ITER):
    """Minimize ``sum(residual(x)**2)`` with Marquardt diagonal damping.

    ``jacobian(x)`` returns d residual / dx. Optional box bounds are enforced
    by clipping trial points. Converged when the largest relative step is
    below ``xtol`` or the relative cost decrease is below ``ftol``. Steps are
    measured against ``max(|x|, 1)``, so callers should pass variables scaled
    to order one.
    """
    x = np.asarray(x0, dtype=float).copy()
    lo = np.full_like(x, -np.inf) if lower is None else np.asarray(lower, float)
    hi = np.full_like(x, np.inf) if upper is None else np.asarray(upper, float)
    x = np.clip(x, lo, hi)
    r = residual(x)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        if cost == 0.0:
            return LmResult(x, cost, jacobian(x), it)
        J = jacobian(x)
        g = J.T @ r
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = max(d.max(), 1.0) * 1e-12 if d.size else 1.0
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(A + lam * np.diag(d), -g, rcond=None)[0]
            xn = np.clip(x + step, lo, hi)
            step = xn - x
            rn = residual(xn)
            cn = float(rn @ rn)
            if np.isfinite(cn) and cn <= cost:
                break
            lam *= 4.0
            if lam > 1e20:
                # no downhill direction left at machine precision
                return LmResult(x, cost, J, it)
        rel_step = np.max(np.abs(step) / np.maximum(np.abs(x), 1.0)) if step.size else 0.0
        drop = cost - cn
        x, r, cost = xn, rn, cn
        lam = max(lam / 3.0, 1e-12)
        if rel_step < xtol or drop <= ftol * (cost + drop):
            return LmResult(x, cost, jacobian(x), it)
    raise ConvergenceError(f"no convergence after {max_iter} iterations", best=x)


def covariance(jac, sigma2, rcond=1e-12):
    """``sigma2 (J^T J)^-1`` via SVD; unidentifiable directions get ``inf``."""
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    keep = s > rcond * s[0] if s.size and s[0] > 0 else np.zeros_like(s, bool)
    v = vt.T
    cov = (v[:, keep] / s[keep] ** 2) @ v[:, keep].T * sigma2
    null = v[:, ~keep]
    if null.size:
        touched = np.any(np.abs(null) > 1e-8, axis=1)
        cov[touched, :] = np.inf
        cov[:, touched] = np.inf
    return cov
