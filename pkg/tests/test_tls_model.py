import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpsloss.errors import EmptySelectionError, IllPosedFitError, InvalidParameterError
from cpsloss.tls_model import (TlsFitParams, bounds_table, fit_power_sweep, fit_temperature_sweep,
                               interface_bound, low_power_q, quasiparticle_bound, thermal_factor,
                               tls_gradient, tls_inverse_q)

F0 = 5.47e9
TRUTH = TlsFitParams(3e-7, 20.0, 0.4, 8e6)


def sweep(params, n=None, temp=0.02, noise=0.0, seed=0, sigma=None):
    n = np.logspace(-1, 6, 30) if n is None else n
    q = 1 / tls_inverse_q(params, n, temp, F0)
    q = q * (1 + noise * np.random.default_rng(seed).standard_normal(n.size))
    cols = [n, q] if sigma is None else [n, q, sigma * q]
    return np.column_stack(cols)


def test_high_temperature_limit_leaves_residual_loss():
    assert abs(tls_inverse_q(TRUTH, 0.0, 50.0, F0) - 1 / 8e6) < 0.01 / 8e6


def test_saturation_limit():
    assert abs(tls_inverse_q(TRUTH, 1e15, 0.02, F0) * 8e6 - 1) < 1e-3


def test_low_power_limit():
    want = 3e-7 * thermal_factor(0.02, F0) + 1 / 8e6
    assert tls_inverse_q(TRUTH, 0.0, 0.02, F0) == pytest.approx(want, rel=1e-15)


def test_domain_errors():
    with pytest.raises(InvalidParameterError):
        tls_inverse_q(TRUTH, -1.0, 0.02, F0)
    with pytest.raises(InvalidParameterError):
        tls_inverse_q(TRUTH, 1.0, 0.0, F0)
    with pytest.raises(InvalidParameterError):
        TlsFitParams(1e-7, -1.0, 0.5, 1e6)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(1e-8, 1e-5), nc=st.floats(0.1, 1e4), beta=st.floats(0.1, 1.99),
       qr=st.floats(1e5, 1e8), temp=st.floats(0.01, 1.0))
def test_gradient_matches_finite_differences(a, nc, beta, qr, temp):
    p = TlsFitParams(a, nc, beta, qr)
    n = np.logspace(-2, 6, 25)
    g = tls_gradient(p, n, temp, F0)
    v = p.as_vector()
    for k in range(4):
        h = 1e-5 * v[k]
        up, dn = v.copy(), v.copy()
        up[k] += h
        dn[k] -= h
        fd = (tls_inverse_q(TlsFitParams(*up), n, temp, F0)
              - tls_inverse_q(TlsFitParams(*dn), n, temp, F0)) / (2 * h)
        scale = np.max(np.abs(g[:, k]))
        assert np.max(np.abs(g[:, k] - fd)) <= 1e-6 * scale


def test_power_fit_round_trip():
    fit = fit_power_sweep(sweep(TRUTH), F0, 0.02)
    for got, want in zip(fit.params.as_vector(), TRUTH.as_vector()):
        assert got == pytest.approx(want, rel=1e-6)
    assert not fit.degenerate


def test_power_fit_with_noise():
    errs = []
    for seed in range(20):
        fit = fit_power_sweep(sweep(TRUTH, noise=0.02, seed=seed, sigma=0.02), F0, 0.02)
        errs.append(abs(fit.params.f_tls_tan_delta / TRUTH.f_tls_tan_delta - 1))
        assert fit.weighted
    assert np.median(errs) < 0.05


@settings(max_examples=10, deadline=None)
@given(st.randoms(use_true_random=False))
def test_power_fit_is_order_invariant(rnd):
    pts = sweep(TRUTH, noise=0.01, seed=3)
    perm = list(range(len(pts)))
    rnd.shuffle(perm)
    a = fit_power_sweep(pts, F0, 0.02).params.as_vector()
    b = fit_power_sweep(pts[perm], F0, 0.02).params.as_vector()
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_flat_sweep_is_degenerate(data_dir):
    from cpsloss.io import read_sweep
    pts, has_sigma, _ = read_sweep(data_dir / "flat_power.csv", "power")
    fit = fit_power_sweep(pts, 4.495e9, 0.02)
    assert fit.degenerate and not has_sigma
    assert fit.params.q_r == pytest.approx(2e6, rel=1e-9)


def test_power_fit_preconditions():
    with pytest.raises(IllPosedFitError):
        fit_power_sweep(sweep(TRUTH)[:5], F0, 0.02)
    with pytest.raises(IllPosedFitError):
        fit_power_sweep(sweep(TRUTH, n=np.linspace(1, 50, 10)), F0, 0.02)


def test_cps1_power_fixture(data_dir):
    from cpsloss.io import read_sweep
    pts, _, _ = read_sweep(data_dir / "cps1_power.csv", "power")
    fit = fit_power_sweep(pts, 4.495e9, 0.02)
    assert fit.params.n_c == pytest.approx(20.0, rel=1e-4)
    assert low_power_q(pts, fit.params.n_c) == pytest.approx(1.5e6, rel=1e-6)


def test_temperature_fit_fixture(data_dir):
    from cpsloss.io import read_sweep
    pts, _, _ = read_sweep(data_dir / "cps3_temperature.csv", "temperature")
    fit = fit_temperature_sweep(pts, F0)
    assert 1 / fit.saturated_tls_loss == pytest.approx(3.4e6, rel=0.05)


def test_temperature_fit_exact_round_trip():
    t = np.geomspace(0.02, 0.8, 10)
    q = 1 / (2e-7 * thermal_factor(t, F0) + 1e-7)
    fit = fit_temperature_sweep(np.column_stack([t, q]), F0)
    assert fit.saturated_tls_loss == pytest.approx(2e-7, rel=1e-9)
    assert fit.q_r == pytest.approx(1e7, rel=1e-9)


def test_temperature_fit_needs_span():
    t = np.linspace(0.02, 0.03, 8)
    with pytest.raises(IllPosedFitError):
        fit_temperature_sweep(np.column_stack([t, np.full(8, 1e6)]), F0)


def test_low_power_selection():
    pts = np.array([[0.1, 1.0], [1.0, 3.0], [100.0, 10.0]])
    assert low_power_q(pts, 10.0) == 2.0
    with pytest.raises(EmptySelectionError):
        low_power_q(pts, 0.01)


def test_interface_bounds_cps3():
    a = 1 / 3.4e6
    assert interface_bound(a, 17.4 + 24.0 / 2) == pytest.approx(10e-3, rel=0.1)
    assert interface_bound(a, 106 + 24.0 / 2) == pytest.approx(2.5e-3, rel=0.1)
    assert interface_bound(a, 103) == pytest.approx(2.9e-3, rel=0.1)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(1e-9, 1e-4), p=st.floats(1.0, 1e3), k=st.floats(0.1, 10.0))
def test_interface_bound_homogeneity(a, p, k):
    assert interface_bound(k * a, p) == pytest.approx(k * interface_bound(a, p), rel=1e-12)
    assert interface_bound(a, k * p) == pytest.approx(interface_bound(a, p) / k, rel=1e-12)


def test_quasiparticle_bound_in_expected_band():
    n = quasiparticle_bound(8e6, 0.0076766, 5.47e9)
    assert 300 < n < 500


def test_bounds_table_thickness_rows():
    rows = bounds_table(1 / 3.4e6, 0.6 / 3.4e6 / 3.4, {"ma": 29.4, "ms": 118.0, "sa": 103.0},
                        8e6, 1e6, 0.0077, 5.47e9, literature_tan_delta={"ma": 9.9e-3})
    ma = rows[0]
    assert ma["interface"] == "MA"
    assert ma["thickness_bound_nm"] == pytest.approx(1.0, rel=0.2)
    assert [r["interface"] for r in rows] == ["MA", "MS", "SA", "n_qp"]
