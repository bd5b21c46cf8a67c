"""Independent reference calculations used only by the tests."""

import numpy as np
from scipy.constants import epsilon_0, mu_0
from scipy.integrate import dblquad
from scipy.special import ellipk


def _k_ratio(k):
    """K(k) / K(k') with the modulus (not the parameter) as input."""
    return ellipk(k * k) / ellipk(1 - k * k)


def cps_capacitance(width, gap, eps_sub):
    """Zero-thickness coplanar strips on a semi-infinite substrate (F/m)."""
    k = gap / (gap + 2 * width)
    return epsilon_0 * (eps_sub + 1) / 2 / _k_ratio(k)


def cps_inductance(width, gap):
    """External inductance per length of zero-thickness coplanar strips (H/m)."""
    k = gap / (gap + 2 * width)
    return mu_0 * _k_ratio(k)


def neumann_parallel(length, distance):
    """Mutual inductance of two coaxially aligned parallel filaments by quadrature."""
    val, _ = dblquad(lambda x, y: 1 / np.hypot(x - y, distance), 0, length, 0, length,
                     epsabs=0, epsrel=1e-10)
    return mu_0 / (4 * np.pi) * val


def mean_log_distance_quadrature(a, b, n=40):
    """Gauss-Legendre estimate of the mean of ln|r_a - r_b| over two rectangles."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = (x + 1) / 2, w / 2

    def pts(r):
        px = r[0] + x * (r[1] - r[0])
        py = r[2] + x * (r[3] - r[2])
        X, Y = np.meshgrid(px, py)
        W = np.outer(w, w)
        return X.ravel(), Y.ravel(), W.ravel()

    ax, ay, aw = pts(a)
    bx, by, bw = pts(b)
    d = np.hypot(ax[:, None] - bx[None, :], ay[:, None] - by[None, :])
    return float(aw @ np.log(d) @ bw)


def thin_strip_kinetic(width, thickness, london_depth):
    """Kinetic inductance per length of the strip pair, both strips in series."""
    return 2 * mu_0 * london_depth / (np.tanh(thickness / london_depth) * width)


def beta_nb2o5(a_nb=92.906, a_o=15.999):
    return 2 * a_nb / (2 * a_nb + 5 * a_o)


def single_strip_neumann(geom, n):
    """Uniform-current inductance of one strip from ``n`` side-by-side filaments.

    Pair terms are Neumann quadratures at the centre spacing; self terms use
    the thin-rectangle GMD approximation 0.2235 (a + b).
    """
    fw = geom.width / n
    cx = (np.arange(n) + 0.5) * fw
    self_gmd = 0.2235 * (fw + geom.t_nb)
    total = 0.0
    for i in range(n):
        for j in range(n):
            d = abs(cx[i] - cx[j]) if i != j else self_gmd
            total += neumann_parallel(geom.length, d)
    return total / n ** 2
