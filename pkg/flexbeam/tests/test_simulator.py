"""Finite-difference operator, Newmark stepping and comparison with the series."""

from __future__ import annotations

import math

import numpy as np
import pytest

from flexbeam.errors import (
    DimensionMismatchError,
    GridMismatchError,
    GridTooCoarseError,
    IncompatibleInitialDataError,
    OutOfDomainError,
)
from flexbeam.models import ConstantSignal, PolyExpSignal
from flexbeam.numerics.beam import SpatialGrid
from flexbeam.numerics.jets import make_trajectory_spec
from flexbeam.numerics.simulator import (
    InputSignal,
    SimSettings,
    SimState,
    compare_to_flat,
    discretize,
    energy,
    natural_frequencies,
    simulate,
    state_from_beam,
)
from flexbeam.numerics.synthesis import (
    BeamState,
    make_synthesis_params,
    synthesize_field,
)


def rest_state(x, level=0.0):
    return BeamState(
        x=x, u=np.full(x.size, level), v=np.zeros(x.size), alpha=0.0, beta=0.0
    )


def bent_state(x, L, eps=0.01):
    return BeamState(
        x=x, u=eps * (L - x) ** 2, v=np.zeros(x.size), alpha=0.0, beta=0.0
    )


# --- Operator ---


def test_interior_rows_are_biharmonic(uniform_cfg):
    op = discretize(uniform_cfg, 64)
    i = 32  # w_i sits in column i + 1
    row = op.K[i + 1, i - 1 : i + 4] * op.dx**3
    np.testing.assert_allclose(row, [1.0, -4.0, 6.0, -4.0, 1.0], rtol=1e-10)


def test_stiffness_is_symmetric(ref_cfg):
    op = discretize(ref_cfg, 64)
    scale = np.abs(op.K).max()
    assert np.abs(op.K - op.K.T).max() <= 1e-12 * scale
    full = op.full_stiffness()
    np.testing.assert_allclose(full[:-1, :-1], op.K, rtol=0, atol=1e-12 * scale)
    np.testing.assert_allclose(full[:-1, -1], op.k_f, rtol=0, atol=1e-12 * scale)


def test_lumped_mass(uniform_cfg):
    op = discretize(uniform_cfg, 32)
    assert op.mass[0] == 0.1
    assert op.mass[1] == pytest.approx(0.5 + 0.5 / 32)
    np.testing.assert_allclose(op.mass[2:], 1.0 / 32)
    assert op.input_mass == pytest.approx(0.5 / 32)


def test_operator_too_coarse(ref_cfg):
    with pytest.raises(GridTooCoarseError):
        discretize(ref_cfg, 8)


def test_natural_frequencies_increase(ref_cfg):
    freqs = natural_frequencies(discretize(ref_cfg, 64), 6)
    assert freqs.shape == (6,)
    assert freqs[0] > 0.0
    assert np.all(np.diff(freqs) > 0.0)


def test_frequencies_converge_under_refinement(ref_cfg):
    coarse = natural_frequencies(discretize(ref_cfg, 40), 2)
    fine = natural_frequencies(discretize(ref_cfg, 80), 2)
    np.testing.assert_allclose(coarse, fine, rtol=1e-2)


# --- Energy ---


def test_energy_of_rest_states(ref_cfg):
    op = discretize(ref_cfg, 64)
    x = op.x
    assert energy(op, state_from_beam(op, rest_state(x))) == 0.0
    assert energy(op, state_from_beam(op, rest_state(x, 0.4))) == pytest.approx(
        0.0, abs=1e-20
    )


def test_energy_is_quadratic(ref_cfg):
    op = discretize(ref_cfg, 64)
    state = state_from_beam(op, bent_state(op.x, ref_cfg.L))
    doubled = SimState(2.0 * state.q, 2.0 * state.q_dot, 2.0 * state.f, 0.0)
    assert energy(op, state) > 0.0
    assert energy(op, doubled) == pytest.approx(4.0 * energy(op, state), rel=1e-12)


def test_energy_checks_dimensions(ref_cfg):
    op = discretize(ref_cfg, 64)
    with pytest.raises(DimensionMismatchError):
        energy(op, SimState(np.zeros(10), np.zeros(10), 0.0, 0.0))
    with pytest.raises(DimensionMismatchError):
        state_from_beam(op, rest_state(np.linspace(0.0, 0.5, 33)))


# --- Time stepping ---


def test_rest_state_is_stationary(ref_cfg):
    op = discretize(ref_cfg, 64)
    signal = InputSignal.constant(0.4, 1.0)
    result = simulate(op, rest_state(op.x, 0.4), signal, SimSettings(1e-3, 1.0, 0.1))
    assert result.w.shape == (11, 65)
    np.testing.assert_allclose(result.w, 0.4, rtol=0, atol=1e-12)
    np.testing.assert_allclose(result.w_t, 0.0, rtol=0, atol=1e-10)


def test_free_vibration_conserves_energy(ref_cfg):
    op = discretize(ref_cfg, 64)
    signal = InputSignal.constant(0.0, 1.0)
    z0 = bent_state(op.x, ref_cfg.L)
    result = simulate(op, z0, signal, SimSettings(1e-3, 1.0, 0.01))
    assert result.constant_input
    assert result.energy[0] > 0.0
    assert result.energy_drift <= 1e-8
    # the bent beam is released, so the tip moves
    assert np.abs(result.tip - result.tip[0]).max() > 1e-4


def test_damping_dissipates_energy(ref_cfg):
    op = discretize(ref_cfg, 64)
    signal = InputSignal.constant(0.0, 1.0)
    z0 = bent_state(op.x, ref_cfg.L)
    result = simulate(op, z0, signal, SimSettings(1e-3, 1.0, 0.01, damping=0.1))
    assert result.energy[-1] < result.energy[0]


def test_incompatible_start_rejected(ref_cfg):
    op = discretize(ref_cfg, 64)
    signal = InputSignal.constant(0.0, 1.0)
    with pytest.raises(IncompatibleInitialDataError):
        simulate(op, rest_state(op.x, 0.4), signal, SimSettings(1e-3, 1.0, 0.1))


def test_horizon_beyond_signal(ref_cfg):
    op = discretize(ref_cfg, 64)
    signal = InputSignal.constant(0.0, 1.0)
    with pytest.raises(OutOfDomainError):
        simulate(op, rest_state(op.x), signal, SimSettings(1e-3, 2.0, 0.1))


def test_input_signal_reconstruction():
    signal = InputSignal.constant(0.25, 2.0)
    np.testing.assert_allclose(signal.value(np.linspace(0, 2, 9)), 0.25, rtol=1e-14)
    np.testing.assert_allclose(signal.rate(np.linspace(0, 2, 9)), 0.0, atol=1e-15)
    assert signal.end == 2.0


# --- Cross-validation against the series ---


@pytest.fixture(scope="module", params=["moving_start", "rest_to_rest"])
def transfer(request):
    start = (
        PolyExpSignal(poly=[1.0], exp_poly=[0.0, 0.0, 10.0], rate=-2.0)
        if request.param == "moving_start"
        else ConstantSignal(value=0.4)
    )
    return make_trajectory_spec(3.0, 1.5, start, ConstantSignal(value=0.0))


def simulated_error(ref_cfg, ref_table, transfer, Nx, dt):
    params = make_synthesis_params(20, 3.0, SpatialGrid(ref_cfg.L, Nx), 301)
    traj = synthesize_field(ref_table, transfer, params, with_derivatives=False)
    signal = InputSignal.from_samples(traj.input_samples())
    sim = simulate(
        discretize(ref_cfg, Nx), traj.state(0), signal, SimSettings(dt, 3.0, 0.01)
    )
    return compare_to_flat(sim, traj), traj, sim


def test_simulation_converges_to_series(ref_cfg, ref_table, transfer):
    coarse, _, _ = simulated_error(ref_cfg, ref_table, transfer, 50, 2e-3)
    fine, traj, sim = simulated_error(ref_cfg, ref_table, transfer, 100, 1e-3)
    assert fine.joint_sup <= 1e-9
    assert fine.field_relative < 0.02
    # second order in space and time together
    assert math.log2(coarse.tip_sup / fine.tip_sup) >= 1.8
    assert math.log2(coarse.field_sup / fine.field_sup) >= 1.8
    assert sim.tip[-1] == pytest.approx(traj.w[-1, 0], abs=0.004)
    assert not sim.constant_input


def test_compare_needs_matching_nodes(ref_cfg, ref_table, transfer):
    params = make_synthesis_params(20, 3.0, SpatialGrid(ref_cfg.L, 50), 31)
    traj = synthesize_field(ref_table, transfer, params, with_derivatives=False)
    params = make_synthesis_params(20, 3.0, SpatialGrid(ref_cfg.L, 100), 31)
    other = synthesize_field(ref_table, transfer, params, with_derivatives=False)
    op = discretize(ref_cfg, 50)
    sim = simulate(
        op,
        traj.state(0),
        InputSignal.from_samples(traj.input_samples()),
        SimSettings(1e-2, 3.0, 0.1),
    )
    with pytest.raises(GridMismatchError):
        compare_to_flat(sim, other)
