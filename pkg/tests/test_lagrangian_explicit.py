import numpy as np
import pytest

from conftest import random_state
from swlp.boundary import BoundaryPolicy
from swlp.lagrangian_explicit import (CFLViolation, acoustic_cfl_dt, acoustic_context,
                                      explicit_acoustic_step)
from swlp.mesh_state import FlowState, Grid1D
from swlp.relaxation import InterfaceSpeeds, RelaxSpeedPolicy, SpeedMode, compute_interface_speeds

NEU = BoundaryPolicy.neumann()


def bumpy_grid(n, x_max=10.0):
    g0 = Grid1D(0.0, x_max, n, np.zeros(n))
    x = g0.cell_centers
    return Grid1D(0.0, x_max, n, 0.5 * np.exp(-((x - x_max / 2) ** 2)))


def test_uniform_state_fixed_point():
    n = 8
    grid = Grid1D(0.0, 1.0, n, np.full(n, 0.3))
    state = FlowState(np.full(n, 2.0), np.full(n, 1.4))
    speeds = compute_interface_speeds(state, RelaxSpeedPolicy(), 9.81)
    out = explicit_acoustic_step(state, grid, speeds, 1e-3, 9.81, NEU)
    np.testing.assert_array_equal(out.u_star, 0.7)
    np.testing.assert_array_equal(out.pi_star, 0.5 * 9.81 * 4.0)
    np.testing.assert_array_equal(out.L, 1.0)
    np.testing.assert_array_equal(out.h_minus, state.h)
    np.testing.assert_array_equal(out.hu_minus, state.hu)


def test_lake_at_rest_fixed_point():
    n = 50
    grid = bumpy_grid(n)
    state = FlowState(2.0 - grid.z, np.zeros(n))
    for mode in SpeedMode:
        speeds = compute_interface_speeds(state, RelaxSpeedPolicy(mode), 9.81)
        dt = acoustic_cfl_dt(state, grid, speeds)
        out = explicit_acoustic_step(state, grid, speeds, dt, 9.81, NEU)
        assert np.max(np.abs(out.u_star)) <= 1e-15
        np.testing.assert_allclose(out.h_minus, state.h, rtol=1e-15)
        assert np.max(np.abs(out.hu_minus)) <= 1e-14
        np.testing.assert_allclose(out.L, 1.0, rtol=0, atol=1e-16)


def test_two_cell_example():
    grid = Grid1D(0.0, 2.0, 2, np.zeros(2))
    state = FlowState(np.array([1.0, 1.0]), np.array([1.0, -1.0]))
    speeds = InterfaceSpeeds(np.full(3, 1.01))
    out = explicit_acoustic_step(state, grid, speeds, 0.1, 1.0, NEU)
    assert out.u_star[1] == 0.0
    assert out.pi_star[1] == pytest.approx(0.5 + 1.01, rel=1e-15)


def test_acoustic_cfl_dt_examples():
    n = 4
    grid = Grid1D(0.0, n, n, np.zeros(n))
    state = FlowState(np.ones(n), np.zeros(n))
    speeds = InterfaceSpeeds(np.full(n + 1, 1.01))
    assert acoustic_cfl_dt(state, grid, speeds) == pytest.approx(1 / 2.02, rel=1e-15)
    wide = Grid1D(0.0, 2 * n, n, np.zeros(n))
    assert acoustic_cfl_dt(state, wide, speeds) == pytest.approx(2 / 2.02, rel=1e-15)
    shallow = FlowState(0.5 * np.ones(n), np.zeros(n))
    assert acoustic_cfl_dt(shallow, grid, speeds) == pytest.approx(0.5 / 2.02, rel=1e-15)


def test_uses_larger_adjacent_speed():
    grid = Grid1D(0.0, 3.0, 3, np.zeros(3))
    state = FlowState(np.ones(3), np.zeros(3))
    speeds = InterfaceSpeeds(np.array([1.0, 4.0, 1.0, 1.0]))
    assert acoustic_cfl_dt(state, grid, speeds) == pytest.approx(1 / 8)


def test_mass_identity_and_positivity(rng):
    n = 200
    grid = bumpy_grid(n)
    for _ in range(20):
        state = random_state(rng, n, h_range=(0.5, 3.0), u_range=(-3, 3))
        speeds = compute_interface_speeds(state, RelaxSpeedPolicy(), 9.81)
        dt = acoustic_cfl_dt(state, grid, speeds)
        out = explicit_acoustic_step(state, grid, speeds, dt, 9.81, NEU)
        np.testing.assert_allclose(out.L * out.h_minus, state.h, rtol=4e-16)
        assert np.all(out.h_minus > 0)
        tau_from_L = 1 / out.h_minus
        np.testing.assert_allclose(out.state_minus.tau, tau_from_L, rtol=1e-13)


def test_flat_bottom_has_no_bracket(rng):
    n = 30
    grid = Grid1D(0.0, 1.0, n, np.full(n, -0.7))
    state = random_state(rng, n)
    ctx = acoustic_context(state, grid, 9.81, NEU)
    assert np.all(ctx.m_jump == 0) and np.all(ctx.source_cell == 0)


def test_pi_update_preserves_I_uniform_speed(rng):
    n = 40
    grid = bumpy_grid(n)
    state = random_state(rng, n)
    speeds = compute_interface_speeds(state, RelaxSpeedPolicy(SpeedMode.GLOBAL), 9.81)
    a = speeds.a[0]
    dt = acoustic_cfl_dt(state, grid, speeds)
    out = explicit_acoustic_step(state, grid, speeds, dt, 9.81, NEU)
    I_n = 0.5 * 9.81 * state.h**2 + a * a / state.h
    I_m = out.state_minus.pi + a * a * out.state_minus.tau
    np.testing.assert_allclose(I_m, I_n, rtol=1e-13)


def test_cfl_violation_raises():
    n = 10
    grid = Grid1D(0.0, 1.0, n, np.zeros(n))
    u = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    state = FlowState(np.ones(n), u)
    speeds = compute_interface_speeds(state, RelaxSpeedPolicy(), 9.81)
    with pytest.raises(CFLViolation) as err:
        explicit_acoustic_step(state, grid, speeds, 1.0, 9.81, NEU)
    assert err.value.cell is not None
