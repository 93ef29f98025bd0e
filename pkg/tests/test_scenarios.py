import numpy as np
import pytest

from conftest import bisect_depth, random_equilibrium_triples
from swlp.boundary import DirichletDepth, DirichletDischarge
from swlp.driver import Variant
from swlp.scenarios import (Branch, EquilibriumSpec, NoEquilibriumError, SHOCK_BUMP_COEFF_DISCONTINUOUS,
                            bernoulli_residual, build_scenario, critical_depth, equilibrium_depth,
                            equilibrium_profile, list_scenarios, shock_topography, transcritical_reference)

G = 9.81
SUB, SUPER = Branch.SUBCRITICAL, Branch.SUPERCRITICAL


def value_at(grid, arr, x):
    return arr[np.argmin(np.abs(grid.cell_centers - x))]


def test_catalogue():
    names = list_scenarios()
    for name in ("dam_break", "perturbation", "bump_fluvial", "bump_transcritical_noshock",
                 "bump_transcritical_shock", "nonunique_riemann", "lake_at_rest"):
        assert name in names
    with pytest.raises(KeyError):
        build_scenario("tsunami")


@pytest.mark.parametrize("name", list_scenarios())
def test_initial_states_positive(name):
    grid, state = build_scenario(name).initial_state()
    assert np.all(state.h > 0) and np.all(np.isfinite(state.hu))
    assert grid.n_cells == state.h.size


def test_dam_break_data():
    sc = build_scenario("dam_break")
    grid, state = sc.initial_state()
    assert grid.n_cells == 1500 and sc.t_end == 50.0
    assert value_at(grid, state.h, 100.0) == 20.0
    assert value_at(grid, state.h, 1000.0) == 15.0
    assert sc.z_function(np.array([750.0]))[0] == 8.0
    assert np.all(state.hu == 0)


def test_perturbation_data():
    sc = build_scenario("perturbation")
    grid, state = sc.initial_state()
    assert grid.dx == pytest.approx(1 / 500)
    assert sc.cfl_factor == 0.9 and sc.dt_limit_factor == 10.0 and sc.t_end == 0.2
    eta = state.h + grid.z
    bump = (grid.cell_centers > 1.1) & (grid.cell_centers < 1.2)
    np.testing.assert_allclose(eta[bump], 3.001, rtol=1e-15)
    np.testing.assert_allclose(eta[~bump], 3.0, rtol=1e-15)
    assert sc.z_function(np.array([1.5]))[0] == pytest.approx(2.5)


def test_nonunique_data():
    sc = build_scenario("nonunique_riemann")
    grid, state = sc.initial_state()
    assert sc.g == 2.0 and grid.n_cells == 300
    assert sc.cfl_factor == 0.9 and sc.dt_limit_factor == 3.0
    left = grid.cell_centers <= 0.5
    assert np.all(grid.z[left] == 1.5) and np.all(state.h[left] == 1.3)
    np.testing.assert_array_equal(state.u[left], -2.0)
    assert np.all(grid.z[~left] == 1.1) and np.all(state.h[~left] == 0.1)
    assert sc.config(Variant.IMEX_LOC).g == 2.0


def test_dt_limit_only_for_implicit():
    sc = build_scenario("perturbation")
    assert sc.config(Variant.IMEX_LOC).dt_limit_factor == 10.0
    assert sc.config(Variant.EXEX_LOC).dt_limit_factor is None


def test_bump_fluvial_out_of_equilibrium_start():
    sc = build_scenario("bump_fluvial")
    grid, state = sc.initial_state()
    assert grid.dx == pytest.approx(1 / 400) and sc.t_end == 200.0
    assert np.all(state.hu == 0.0)
    assert isinstance(sc.bc.left, DirichletDischarge) and sc.bc.left.q == 1.0
    assert isinstance(sc.bc.right, DirichletDepth)
    assert sc.bc.right.h == pytest.approx(equilibrium_depth(EquilibriumSpec(1.0, 25.0), 0.0, G), rel=1e-15)


def test_shock_data():
    sc = build_scenario("bump_transcritical_shock")
    grid, state = sc.initial_state()
    assert grid.dx == pytest.approx(1 / 64) and sc.t_end == 200.0
    np.testing.assert_allclose(state.h + grid.z, 3.13, rtol=1e-15)
    np.testing.assert_allclose(state.hu, 0.18)
    # the adopted coefficient makes the bump continuous; the discontinuous one leaves 0.18 steps at x = 8, 12
    z = shock_topography(np.array([8.0 - 1e-9, 8.0 + 1e-9, 10.0]))
    assert abs(z[1] - z[0]) < 1e-6 and z[2] == pytest.approx(3.0)
    zl = shock_topography(np.array([8.0 - 1e-9, 8.0 + 1e-9]), coeff=SHOCK_BUMP_COEFF_DISCONTINUOUS)
    assert zl[1] - zl[0] == pytest.approx(0.18)
    assert build_scenario("bump_transcritical_shock_discontinuous").z_function(np.array([10.0]))[0] == 3.0


def test_equilibrium_still_water_exact():
    assert equilibrium_depth(EquilibriumSpec(0.0, 25.0), 0.3, G) == 25.0 / G - 0.3
    with pytest.raises(NoEquilibriumError):
        equilibrium_depth(EquilibriumSpec(0.0, 25.0, SUPER), 0.3, G)


def test_equilibrium_fluvial_vs_bisection():
    h = equilibrium_depth(EquilibriumSpec(1.0, 25.0), 0.0, G)
    assert h == pytest.approx(bisect_depth(1.0, 25.0, 0.0, G), rel=1e-12)
    assert abs(bernoulli_residual(h, 1.0, 25.0, 0.0, G)) <= 1e-13 * 25.0


def test_equilibrium_critical_point():
    K1 = 3.0
    K2 = 1.5 * (K1 * G) ** (2 / 3) + G / 2
    h_c = critical_depth(K1, G)
    assert h_c == pytest.approx((K1 * K1 / G) ** (1 / 3), rel=1e-15)
    for branch in Branch:
        assert equilibrium_depth(EquilibriumSpec(K1, K2, branch), 0.5, G) == h_c
    assert abs(bernoulli_residual(h_c, K1, K2, 0.5, G)) <= 1e-13 * K2


def test_equilibrium_no_root():
    with pytest.raises(NoEquilibriumError, match="no real depth"):
        equilibrium_depth(EquilibriumSpec(3.0, 10.0), 0.5, G)


def test_branch_ordering_and_bernoulli(rng):
    K1, K2, z = random_equilibrium_triples(rng, 300)
    for k1, k2, zz in zip(K1, K2, z):
        h_c = critical_depth(k1, G)
        hs = equilibrium_depth(EquilibriumSpec(k1, k2, SUB), zz, G)
        hp = equilibrium_depth(EquilibriumSpec(k1, k2, SUPER), zz, G)
        assert hp < h_c < hs
        for h in (hs, hp):
            assert abs(bernoulli_residual(h, k1, k2, zz, G)) <= 1e-13 * k2
            assert (k1 / h) * h == pytest.approx(k1, rel=1e-15)


def test_profile_and_transcritical_reference():
    sc = build_scenario("bump_transcritical_noshock")
    grid, _ = sc.initial_state()
    K1, K2 = 3.0, 1.5 * (3.0 * G) ** (2 / 3) + G / 2
    x = grid.cell_centers
    ref = transcritical_reference(K1, K2, x, grid.z, 2.0, G)
    fr = (K1 / ref) / np.sqrt(G * ref)
    assert np.all(fr[x < 1.9] < 1) and np.all(fr[x > 2.1] > 1)
    sub = equilibrium_profile(EquilibriumSpec(1.0, 25.0), grid.z, G)
    assert np.all((1.0 / sub) / np.sqrt(G * sub) < 1)
