from dataclasses import replace

import numpy as np
import pytest

from cpsloss.errors import InvalidParameterError, ResolutionError
from cpsloss.field_solver import CpsGeometry
from cpsloss.inductance_solver import (ConductorModel, FilamentSpec, filament_mutual,
                                       inductance_matrix, inductance_shift, kinetic_fraction,
                                       mean_log_distance)

from oracles import (cps_inductance, mean_log_distance_quadrature, neumann_parallel,
                     single_strip_neumann, thin_strip_kinetic)

GEOM = CpsGeometry(width=10e-6, gap=10e-6, length=7.1e-3, t_nb=145e-9)
NORMAL = ConductorModel.normal()
SC = ConductorModel.superconducting(39e-9)


@pytest.mark.parametrize("length,d", [(1e-3, 1e-5), (7e-3, 2e-6), (1e-4, 5e-5)])
def test_filament_kernel_matches_neumann_integral(length, d):
    assert filament_mutual(length, d) == pytest.approx(neumann_parallel(length, d), rel=1e-8)


def test_square_self_gmd():
    sq = np.array([[0.0, 1.0, 0.0, 1.0]])
    assert np.exp(mean_log_distance(sq, sq))[0] == pytest.approx(0.447049, abs=1e-6)


@pytest.mark.parametrize("b", [[1.5, 2.5, 0.0, 0.3], [0.0, 2.0, 1.0, 1.2], [3.0, 3.1, -1.0, 2.0]])
def test_rectangle_gmd_matches_quadrature(b):
    a = np.array([0.0, 1.0, 0.0, 0.5])
    got = mean_log_distance(a[None, :], np.array(b)[None, :])[0]
    assert got == pytest.approx(mean_log_distance_quadrature(a, b), abs=1e-8)


@pytest.fixture(scope="module")
def sc_result():
    return inductance_matrix(GEOM, SC, 5e9)


def test_symmetry_and_invariants(sc_result):
    r = sc_result
    assert r.l1 == pytest.approx(r.l2, rel=1e-9)
    assert r.l1 > 0 and abs(r.m) < np.sqrt(r.l1 * r.l2) and r.l_eff > 0


def test_normal_conductor_matches_conformal_inductance():
    r = inductance_matrix(GEOM, NORMAL, 5e9)
    # finite thickness lowers L slightly relative to the zero-thickness oracle
    assert r.l_per_length == pytest.approx(cps_inductance(10e-6, 10e-6), rel=0.03)
    assert r.l_per_length < cps_inductance(10e-6, 10e-6)


def test_far_separation_limits():
    # partial mutual inductance decays only logarithmically with distance, so the
    # far-field limit is checked on a segment short compared with the separation
    w = GEOM.width
    g = replace(GEOM, gap=100 * w, length=10 * w)
    r = inductance_matrix(g, NORMAL, 5e9, FilamentSpec(nx=20, ny=4))
    assert abs(r.m) / r.l1 < 0.02
    assert r.l_eff == pytest.approx(r.l1 + r.l2, rel=0.05)
    assert r.l_eff == pytest.approx(2 * single_strip_neumann(g, 8), rel=0.05)


def test_kinetic_fraction_against_thin_strip_estimate(geometries):
    for g in geometries.values():
        alpha = kinetic_fraction(g, g.f0, 39e-9)
        lk = thin_strip_kinetic(g.width, g.t_nb, 39e-9)
        geo = inductance_matrix(g, NORMAL, g.f0).l_per_length
        est = lk / (geo + lk)
        assert 0 < alpha < 0.1
        assert alpha == pytest.approx(est, rel=0.15)


def test_kinetic_fraction_limits_and_monotonicity():
    spec = FilamentSpec(nx=30, ny=20)
    alphas = [kinetic_fraction(GEOM, 5e9, lam * 1e-9, spec) for lam in (10, 25, 39, 60, 100)]
    assert all(y > x for x, y in zip(alphas, alphas[1:]))
    assert kinetic_fraction(GEOM, 5e9, 0.0, spec) == pytest.approx(0.0, abs=1e-12)


def test_frequency_independence():
    spec = FilamentSpec(nx=30, ny=10)
    a = kinetic_fraction(GEOM, 4e9, 39e-9, spec)
    b = kinetic_fraction(GEOM, 8e9, 39e-9, spec)
    assert b == pytest.approx(a, rel=1e-6)


def test_filament_refinement_convergence():
    spec = FilamentSpec()
    a = inductance_matrix(GEOM, SC, 5e9, spec.refined(1.25)).l_eff
    b = inductance_matrix(GEOM, SC, 5e9, spec.refined(1.5)).l_eff
    assert abs(b / a - 1) < 5e-3


def test_inductance_shift_sign_and_zero(sc_result):
    assert inductance_shift(GEOM, 0.0, 5e9, 39e-9, baseline=sc_result) == 0.0
    s = inductance_shift(GEOM, 1e-9, 5e9, 39e-9)
    assert 0 < s < 1e-3


def test_model_validation():
    with pytest.raises(InvalidParameterError):
        ConductorModel(kind="normal", london_depth=1e-8)
    with pytest.raises(InvalidParameterError):
        ConductorModel(kind="superconducting")
    with pytest.raises(ResolutionError):
        inductance_matrix(GEOM, ConductorModel.superconducting(5e-9), 5e9, FilamentSpec(nx=4, ny=2))
    with pytest.raises(InvalidParameterError):
        inductance_shift(GEOM, 200e-9, 5e9, 39e-9)
