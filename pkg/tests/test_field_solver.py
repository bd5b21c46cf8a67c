from dataclasses import replace

import numpy as np
import pytest

from cpsloss.errors import InvalidParameterError, NonlinearRegimeError
from cpsloss.field_solver import (SA, CpsGeometry, GridSpec, capacitance,
                                  capacitance_shift, participation_ratios, solve_cross_section)

from oracles import cps_capacitance

FLAT = CpsGeometry(width=10e-6, gap=10e-6, t_nb=0.0)
THICK = CpsGeometry(width=10e-6, gap=10e-6, t_nb=145e-9)


@pytest.fixture(scope="module")
def flat_solution():
    return solve_cross_section(FLAT)


def test_conformal_oracle_w_equals_g(flat_solution):
    c = capacitance(flat_solution)
    assert c == pytest.approx(cps_capacitance(10e-6, 10e-6, 10.0), rel=0.01)


@pytest.mark.parametrize("gap", [22e-6, 46e-6, 100e-6])
def test_conformal_oracle_table_geometries(gap):
    c = capacitance(solve_cross_section(replace(FLAT, gap=gap)))
    assert c == pytest.approx(cps_capacitance(10e-6, gap, 10.0), rel=0.02)


def test_laplace_residual_and_energy_sign(flat_solution):
    assert flat_solution.residual < 1e-10
    assert np.all(flat_solution.cell_energy >= 0)


def test_potential_antisymmetric(flat_solution):
    u = flat_solution.potential
    x = flat_solution.x
    assert np.allclose(x, -x[::-1], atol=1e-18)
    assert np.max(np.abs(u + u[:, ::-1])) < 1e-10


def test_voltage_scaling():
    a = solve_cross_section(FLAT, voltage=1.0)
    b = solve_cross_section(FLAT, voltage=2.0)
    assert b.energy == pytest.approx(4 * a.energy, rel=1e-12)
    assert capacitance(b) == pytest.approx(capacitance(a), rel=1e-12)


def test_reciprocity_under_voltage_sign():
    a = participation_ratios(THICK, check_linearity=False)
    sol_p = solve_cross_section(THICK, voltage=1.0)
    sol_n = solve_cross_section(THICK, voltage=-1.0)
    assert capacitance(sol_n) == pytest.approx(capacitance(sol_p), rel=1e-12)
    assert a.p_tilde_ma > 0


def test_uniform_permittivity_scaling():
    vac = capacitance(solve_cross_section(replace(FLAT, eps_substrate=1.0)))
    # eps 2 everywhere: substrate at 2 and the air half-space scaled via layer_eps
    sol = solve_cross_section(replace(FLAT, eps_substrate=2.0), layer_eps={0: 2.0})
    assert capacitance(sol) == pytest.approx(2 * vac, rel=1e-9)


def test_scale_invariance():
    a = capacitance(solve_cross_section(THICK))
    b = capacitance(solve_cross_section(THICK.scaled(2.0)))
    assert b == pytest.approx(a, rel=1e-3)


def test_capacitance_decreases_with_gap():
    cs = [capacitance(solve_cross_section(replace(THICK, gap=g * 1e-6))) for g in (10, 22, 46, 100)]
    assert all(x > y for x, y in zip(cs, cs[1:]))


def test_refinement_convergence():
    spec = GridSpec()
    c1 = capacitance(solve_cross_section(THICK, spec.refined(1.5)))
    c2 = capacitance(solve_cross_section(THICK, spec.refined(2.0)))
    assert abs(c2 / c1 - 1) < 1e-3


@pytest.fixture(scope="module")
def table_participation(geometries):
    return {d: participation_ratios(g) for d, g in geometries.items()}


def test_participation_ordering(table_participation):
    rows = [table_participation[d] for d in ("CPS1", "CPS2", "CPS3", "CPS4")]
    for key in ("p_tilde_ma", "p_tilde_ms", "p_tilde_sa", "p_tilde_c"):
        vals = [getattr(r, key) for r in rows]
        assert all(x > y for x, y in zip(vals, vals[1:])), key


def test_participation_sum_below_one(table_participation):
    for p in table_participation.values():
        t_nm = p.probe_thickness * 1e9
        total = (p.p_tilde_ma + p.p_tilde_ms + p.p_tilde_sa + p.p_tilde_c) * t_nm * 1e-6
        assert 0 < total < 1


def test_participation_inverse_scaling():
    spec = GridSpec()
    base = participation_ratios(THICK, spec, check_linearity=False)
    for s in (0.5, 2.0):
        # probe layers scale with the geometry so the ratio is exact up to mesh error
        sp = replace(spec, probe_thickness=spec.probe_thickness * s)
        p = participation_ratios(THICK.scaled(s), sp, check_linearity=False)
        assert p.p_tilde_ma * s == pytest.approx(base.p_tilde_ma, rel=0.02)
        assert p.p_tilde_sa * s == pytest.approx(base.p_tilde_sa, rel=0.02)


def test_sa_layer_permittivity_contrast():
    low = participation_ratios(replace(THICK, eps_interface=5.0), check_linearity=False)
    high = participation_ratios(THICK, check_linearity=False)
    ratio = low.p_tilde_sa / high.p_tilde_sa
    # SA fields are a mix of tangential (scales with eps) and normal (1/eps) parts
    assert 0.5 <= ratio <= 2.0


def test_sa_layer_without_contrast_leaves_field_unchanged():
    """An SA slab with air permittivity only relabels bare-surface energy."""
    bare = capacitance(solve_cross_section(THICK))
    sol = solve_cross_section(replace(THICK, t_sa=2e-9), layer_eps={SA: 1.0})
    assert capacitance(sol) == pytest.approx(bare, rel=1e-3)
    assert 0 < sol.region_energy(SA) / sol.energy < 1e-3


def test_linearity_check_trips_for_thick_layers():
    spec = GridSpec(probe_thickness=40e-9, linearity_tolerance=0.01)
    with pytest.raises((NonlinearRegimeError, InvalidParameterError)):
        participation_ratios(THICK, spec)


def test_capacitance_shift_zero():
    assert capacitance_shift(THICK, 0.0, 0.0) == 0.0


def test_capacitance_shift_monotone_in_oxide():
    spec = GridSpec(growth=1.25)
    shifts = [capacitance_shift(THICK, t * 1e-9, 0.5e-9, spec) for t in (0.0, 1.0, 2.5, 5.0)]
    assert all(y > x for x, y in zip(shifts, shifts[1:]))


def test_invalid_geometry():
    with pytest.raises(InvalidParameterError):
        CpsGeometry(width=-1e-6, gap=1e-6)
    with pytest.raises(InvalidParameterError):
        CpsGeometry(width=1e-6, gap=1e-6, t_nb=100e-9, t_ma=80e-9)
    with pytest.raises(InvalidParameterError):
        capacitance_shift(THICK, 1e-9, 200e-9)
