import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

import oracles
from conftest import ground_state
from hardy_nls.dynamics import (
    EvolutionGrid, EvolutionState, ExactBlowupParams, banica_bound_check, discrete_ground_state,
    effective_1d_reduce, evolve, exact_blowup, exact_blowup_v, relative_l2_error, step, virial_check,
    virial_coefficient,
)
from hardy_nls.errors import InvalidParams, MassMismatch
from hardy_nls.params import ModelParams, critical_coupling

P = ModelParams(3, 10 / 3)


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_effective_1d_coefficient_matches_symbolic(d):
    params = ModelParams(d, 2 + 4 / d)
    sym = oracles.effective_1d_symbolic(d, sp.nsimplify(params.c))
    assert effective_1d_reduce(params) == pytest.approx(float(sym), abs=1e-14)
    assert effective_1d_reduce(params) == pytest.approx(-0.25, abs=1e-14)


def test_laplacian_is_self_adjoint_and_nonnegative():
    grid = EvolutionGrid(P, 5.0, 50)
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=50), rng.normal(size=50)
    vol = grid.volumes
    lhs = np.sum(vol * f * grid.laplacian(g))
    rhs = np.sum(vol * g * grid.laplacian(f))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert np.sum(vol * f * grid.laplacian(f)) > 0
    # quadratic form identity
    assert grid.form(f) == pytest.approx(grid._omega * np.sum(vol * f * grid.laplacian(f)), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 5e-2))
def test_step_is_unitary(seed, dt):
    grid = EvolutionGrid(P, 8.0, 200)
    rng = np.random.default_rng(seed)
    v = (rng.normal(size=200) + 1j * rng.normal(size=200)) * np.exp(-grid.r**2)
    state = EvolutionState.from_values(grid, v)
    m0 = grid.mass(state.v)
    for _ in range(5):
        step(state, dt)
    assert grid.mass(state.v) == pytest.approx(m0, rel=1e-12)


def test_linear_energy_is_conserved():
    # tiny amplitude: Crank-Nicolson conserves the quadratic form exactly
    grid = EvolutionGrid(P, 10.0, 400)
    v = 1e-6 * np.exp(-grid.r**2) * (1 + 0j)
    state = EvolutionState.from_values(grid, v)
    f0 = grid.form(state.v)
    evolve(state, 0.1, 1e-2)
    assert grid.form(state.v) == pytest.approx(f0, rel=1e-9)


def test_exact_blowup_coarse():
    gs = ground_state(3, 10 / 3)
    grid = EvolutionGrid.with_spacing(P, 15.0, 1e-2)
    ebp = ExactBlowupParams()
    state = EvolutionState.from_values(grid, exact_blowup_v(P, ebp, 0.0, gs, grid.r))
    evolve(state, 0.2, 1e-3)
    err = relative_l2_error(grid, state.v, exact_blowup_v(P, ebp, state.t, gs, grid.r))
    assert err < 5e-3
    row = state.log[0]
    assert row.gamma == pytest.approx(8 * row.energy, rel=1e-3)
    assert row.gamma_prime == pytest.approx(-16 * row.energy, rel=1e-3)


def test_exact_blowup_mass_equals_ground_mass():
    gs = ground_state(3, 10 / 3)
    for t in (0.0, 0.5, 0.9):
        prof = exact_blowup(P, ExactBlowupParams(1.0, 1.3, 0.2), t, gs)
        assert prof.l2_norm() == pytest.approx(gs.mass, rel=1e-8)


def test_exact_blowup_rejects_bad_inputs():
    gs = ground_state(3, 10 / 3)
    with pytest.raises(InvalidParams):
        exact_blowup_v(P, ExactBlowupParams(), 1.0, gs, [1.0])
    with pytest.raises(InvalidParams):
        ExactBlowupParams(T=-1.0)
    with pytest.raises(InvalidParams):
        exact_blowup_v(ModelParams(3, 4.0), ExactBlowupParams(), 0.0, ground_state(3, 4.0), [1.0])


def test_blowup_proxy_stops_the_run():
    grid = EvolutionGrid.with_spacing(P, 10.0, 1e-2)
    gs = ground_state(3, 10 / 3)
    v = 1.5 * gs.v_at(grid.r)
    state = evolve(EvolutionState.from_values(grid, v), 5.0, 1e-3, blowup_factor=20.0)
    assert state.blowup_detected and state.t < 5.0


def test_discrete_ground_state_is_stationary():
    grid = EvolutionGrid.with_spacing(P, 15.0, 1e-2)
    gs = ground_state(3, 10 / 3)
    v = discrete_ground_state(grid, gs.v_at(grid.r))
    res = grid.laplacian(v) + v - grid.nonlinear_weight() * np.abs(v) ** (P.p - 2) * v
    assert np.max(np.abs(res)) < 1e-10
    assert np.max(np.abs(v - gs.v_at(grid.r))) / gs.v0 < 1e-3


def test_virial_coefficient_forms():
    params = ModelParams(3, 4.0)
    assert virial_coefficient(params) == pytest.approx(4 * virial_coefficient(params, printed=True))
    # vanishes at the mass-critical exponent
    assert virial_coefficient(P) == pytest.approx(0.0, abs=1e-14)


def test_virial_check_requires_uniform_log():
    grid = EvolutionGrid(P, 5.0, 50)
    state = EvolutionState.from_values(grid, np.exp(-grid.r**2))
    with pytest.raises(InvalidParams):
        virial_check(state, P)


def _cutoff_r2(R=8.0):
    # theta = r^2 (1 - r^2/R^2)^2 inside R, zero outside; C^1 and compactly supported
    def theta(r):
        rho = np.minimum(r**2 / R**2, 1.0)
        return r**2 * (1 - rho) ** 2

    def dtheta(r):
        rho = np.minimum(r**2 / R**2, 1.0)
        return 2 * r * (1 - rho) * (1 - 3 * rho)

    return theta, dtheta


def test_banica_bound_on_blowup_profile():
    gs = ground_state(3, 10 / 3)
    theta, dtheta = _cutoff_r2()
    prof = exact_blowup(P, ExactBlowupParams(), 0.0, gs)
    lhs, rhs = banica_bound_check(prof, P, theta, dtheta, gs.mass)
    assert 0 < lhs < rhs
    real = gs.q_profile
    lhs, rhs = banica_bound_check(real, P, theta, dtheta, gs.mass)
    assert lhs == 0.0 and rhs >= 0.0
    with pytest.raises(MassMismatch):
        banica_bound_check(prof.scaled(1.1), P, theta, dtheta, gs.mass)


def test_grid_and_state_validation():
    with pytest.raises(InvalidParams):
        EvolutionGrid(P, 1.0, 2)
    grid = EvolutionGrid(P, 1.0, 10)
    with pytest.raises(InvalidParams):
        EvolutionState.from_values(grid, np.ones(5))
    with pytest.raises(InvalidParams):
        EvolutionState.from_values(grid, np.full(10, np.nan))
    state = EvolutionState.from_values(grid, np.ones(10))
    with pytest.raises(InvalidParams):
        step(state, -1.0)
    with pytest.raises(InvalidParams):
        step(state, 0.1, params=ModelParams(3, 4.0))


def test_subcritical_coupling_standing_wave_short():
    params = ModelParams(3, 10 / 3, critical_coupling(3) / 2)
    gs = ground_state(3, 10 / 3, critical_coupling(3) / 2)
    grid = EvolutionGrid.with_spacing(params, 15.0, 1e-2)
    v0 = discrete_ground_state(grid, gs.v_at(grid.r)).astype(complex)
    state = evolve(EvolutionState.from_values(grid, v0), 0.2, 1e-3)
    assert np.max(np.abs(np.abs(state.v) - np.abs(v0))) / np.max(np.abs(v0)) < 1e-6
    assert np.angle(state.v[0] / v0[0]) == pytest.approx(0.2, abs=1e-5)


def test_snapshots_and_profile_roundtrip():
    grid = EvolutionGrid(P, 5.0, 100)
    v = np.exp(-grid.r**2) * (1 + 0j)
    state = evolve(EvolutionState.from_values(grid, v), 0.02, 1e-3, snapshot_times=(0.0, 0.01))
    assert set(state.snapshots) == {0.0, 0.01}
    np.testing.assert_allclose(state.snapshots[0.0], v)
    back = grid.from_profile(grid.to_profile(state.v))
    np.testing.assert_allclose(back, state.v, rtol=1e-12)
    assert math.isfinite(grid.energy(state.v))
