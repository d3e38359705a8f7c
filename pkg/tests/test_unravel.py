import numpy as np
import pytest
import scipy.linalg
from scipy import stats

from conftest import decaying_qubit
from core.errors import DarkStateError
from core.linalg import PureState, projector, trace_distance
from core.liouville import evolve_density
from core.models import LindbladModel, neel_state
from core.unravel import (
    JumpNoise, StepPropagator, Trajectory, TrajectoryConfig, effective_hamiltonian, ensemble_average,
    evolve_trajectory, jump_weights, perform_jump, run_ensemble, select_jump
)

EXCITED = PureState(np.array([0.0, 1.0]))
GROUND = PureState(np.array([1.0, 0.0]))


def test_effective_hamiltonian_decay_part(mbl4):
    heff = effective_hamiltonian(mbl4).matrix.entries
    h = mbl4.hamiltonian.entries
    decay = sum(rate * op.entries.conj().T @ op.entries for op, rate in mbl4.jumps)
    np.testing.assert_allclose((heff + heff.conj().T) / 2, h, atol=1e-14)
    np.testing.assert_allclose((heff - heff.conj().T) / 2j, -0.5 * decay, atol=1e-14)


def test_select_jump_frequencies():
    weights = np.array([1.0, 3.0])
    picks = [select_jump(weights, u) for u in np.linspace(0, 1, 1000, endpoint=False)]
    assert picks.count(1) == 750
    with pytest.raises(DarkStateError):
        select_jump(np.zeros(3), 0.5)


def test_perform_jump_on_dark_state():
    with pytest.raises(DarkStateError):
        perform_jump(GROUND, decaying_qubit(), np.random.default_rng(0))
    psi, k = perform_jump(EXCITED, decaying_qubit(), np.random.default_rng(0))
    assert k == 0
    np.testing.assert_allclose(psi.amplitudes, GROUND.amplitudes)


def test_noise_clone_replays_draws():
    noise = JumpNoise.from_seed(5, 1, tag="pair")
    twin = noise.clone()
    for _ in range(5):
        assert noise.selection.random() == twin.selection.random()
        noise.renew()
        twin.renew()
        assert noise.threshold == twin.threshold


def test_norm_decreases_between_jumps(mbl4):
    prop = StepPropagator(effective_hamiltonian(mbl4), 0.01)
    traj = Trajectory(neel_state(mbl4.basis), mbl4, prop, JumpNoise.from_seed(3), trace_stride=1)
    traj.advance(5.0)
    rows = traj.trace
    for prev, row in zip(rows, rows[1:]):
        if not row.jump_flag:
            assert row.norm_sq <= prev.norm_sq * (1 + 1e-12)
    assert all(0 < r.norm_sq <= 1 + 1e-12 for r in rows)


def test_integrable_norm_decays_exactly_between_jumps(integrable3):
    # H = 0 and every pair jump has L^dag L = 1, so H_eff = -i gamma (M - 1) / 2
    rate = integrable3.params["gamma"] * (integrable3.params["M"] - 1)
    prop = StepPropagator(effective_hamiltonian(integrable3), 0.01)
    psi0 = PureState(np.eye(integrable3.dim)[0])
    traj = Trajectory(psi0, integrable3, prop, JumpNoise.from_seed(6), trace_stride=1)
    traj.advance(5.0)
    assert traj.jumps
    jump_times = np.array([0.0] + [e.time for e in traj.jumps])
    for row in traj.trace:
        last_jump = jump_times[jump_times <= row.t + 1e-9].max()
        assert row.norm_sq == pytest.approx(np.exp(-rate * (row.t - last_jump)), abs=1e-10)


def test_norm_is_conserved_without_jump_operators(mbl4):
    closed = LindbladModel(hamiltonian=mbl4.hamiltonian, jumps=(), basis=mbl4.basis, label="closed")
    prop = StepPropagator(effective_hamiltonian(closed), 0.01)
    psi0 = neel_state(mbl4.basis)
    traj = Trajectory(psi0, closed, prop, JumpNoise.from_seed(2), trace_stride=5)
    traj.advance(5.0)
    assert traj.jumps == [] and traj.dark_events == 0
    np.testing.assert_allclose([r.norm_sq for r in traj.trace], 1.0, atol=1e-10)
    exact = scipy.linalg.expm(-5j * mbl4.hamiltonian.entries) @ psi0.amplitudes
    np.testing.assert_allclose(traj.psi, exact, atol=1e-10)

def _stepwise_jumps(model, psi0, prop, noise, n_steps):
    """One dt at a time, no ladder."""
    psi = psi0.amplitudes.copy()
    operators = [op.entries for op in model.jump_operators]
    jumps = []
    for step in range(n_steps):
        psi = prop.step @ psi
        if np.vdot(psi, psi).real <= noise.threshold:
            u = noise.selection.random()
            weights, images = jump_weights(psi, operators, model.rates)
            k = select_jump(weights, u)
            psi = images[k] / np.linalg.norm(images[k])
            jumps.append(((step + 1) * prop.dt, k))
            noise.renew()
    return jumps


def test_ladder_jumps_match_single_steps(mbl4):
    prop = StepPropagator(effective_hamiltonian(mbl4), 0.01)
    noise = JumpNoise.from_seed(17, tag="check")
    reference = _stepwise_jumps(mbl4, neel_state(mbl4.basis), prop, noise.clone(), 3000)
    traj = Trajectory(neel_state(mbl4.basis), mbl4, prop, noise)
    traj.advance_steps(3000)
    assert len(traj.jumps) == len(reference) > 0
    for event, (t, k) in zip(traj.jumps, reference):
        assert event.time == pytest.approx(t, abs=1e-9)
        assert event.operator_index == k


def test_segmented_advance_matches_single_call(mbl4):
    prop = StepPropagator(effective_hamiltonian(mbl4), 0.01)
    one = Trajectory(neel_state(mbl4.basis), mbl4, prop, JumpNoise.from_seed(4))
    many = Trajectory(neel_state(mbl4.basis), mbl4, prop, JumpNoise.from_seed(4))
    one.advance(10.0)
    for _ in range(10):
        many.advance(1.0)
    assert [(e.time, e.operator_index) for e in one.jumps] == [(e.time, e.operator_index) for e in many.jumps]
    np.testing.assert_allclose(one.psi, many.psi, atol=1e-12)


def test_first_jump_times_are_exponential():
    model = decaying_qubit(gamma=1.0)
    prop = StepPropagator(effective_hamiltonian(model), 1e-3)
    times = []
    for i in range(2000):
        traj = Trajectory(EXCITED, model, prop, JumpNoise.from_seed(8, i))
        traj.advance(15.0)
        assert len(traj.jumps) <= 1
        if traj.jumps:
            times.append(traj.jumps[0].time)
    assert stats.kstest(times, "expon").pvalue > 0.01


def test_evolve_trajectory_requires_unit_norm(mbl4):
    cfg = TrajectoryConfig(dt=0.01, run_time=1.0)
    with pytest.raises(ValueError):
        evolve_trajectory(PureState(2 * neel_state(mbl4.basis).amplitudes), effective_hamiltonian(mbl4), mbl4, cfg)


def test_trajectory_config_steps():
    cfg = TrajectoryConfig(dt=0.01, transient_time=1.0, run_time=2.5)
    assert cfg.steps(cfg.total_time) == 350
    with pytest.raises(ValueError):
        cfg.steps(0.015)


def test_ensemble_average_validation():
    with pytest.raises(ValueError):
        ensemble_average([])
    with pytest.raises(ValueError):
        ensemble_average([PureState(np.array([2.0, 0.0]))])
    rho = ensemble_average([GROUND, EXCITED])
    np.testing.assert_allclose(rho, np.eye(2) / 2)


def test_ensemble_is_deterministic(mbl4):
    psi0 = neel_state(mbl4.basis)
    a = run_ensemble(mbl4, psi0, 1.0, 20, master_seed=3, chunk_size=7)
    b = run_ensemble(mbl4, psi0, 1.0, 20, master_seed=3, chunk_size=20)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.amplitudes, y.amplitudes)


def test_ensemble_worker_count_does_not_change_results(mbl4):
    psi0 = neel_state(mbl4.basis)
    serial = run_ensemble(mbl4, psi0, 1.0, 8, master_seed=1, chunk_size=2)
    pooled = run_ensemble(mbl4, psi0, 1.0, 8, master_seed=1, chunk_size=2, workers=2)
    for x, y in zip(serial, pooled):
        np.testing.assert_array_equal(x.amplitudes, y.amplitudes)


@pytest.mark.slow
def test_ensemble_reproduces_master_equation(mbl4):
    psi0 = neel_state(mbl4.basis)
    rho_exact = evolve_density(mbl4, projector(psi0), 5.0)
    snapshots = run_ensemble(mbl4, psi0, 5.0, 2000, master_seed=2021)
    assert trace_distance(ensemble_average(snapshots), rho_exact) <= 0.05


@pytest.mark.slow
def test_ensemble_error_shrinks_like_inverse_sqrt(mbl4):
    psi0 = neel_state(mbl4.basis)
    rho_exact = evolve_density(mbl4, projector(psi0), 5.0)
    snapshots = run_ensemble(mbl4, psi0, 5.0, 8000, master_seed=77)
    small = np.mean([trace_distance(ensemble_average(snapshots[i:i + 500]), rho_exact)
                     for i in range(0, 8000, 500)])
    large = np.mean([trace_distance(ensemble_average(snapshots[i:i + 2000]), rho_exact)
                     for i in range(0, 8000, 2000)])
    assert 1.4 <= small / large <= 2.6
