"""
Built-in property and oracle suite behind the `check` command.

Every check is small enough that the whole suite runs in well under a
minute; the GinUE reference constants are produced separately because
they need large matrices.
"""
import filecmp
import logging
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import NORM_UNDERFLOW
from core.csr import CsrSamples, csr_values, neighbor_indices, sample_ginue, sample_poisson_points, summarize
from core.linalg import PureState
from core.liouville import build_superoperator, spectrum, vec, apply_lindbladian
from core.lyapunov import bisect_epsilon, random_direction, observable_distance, perturb_state
from core.models import build_integrable_chain, model_from_params, neel_state, sample_goe_observable
from core.seeding import stream
from core.unravel import JumpNoise, StepPropagator, Trajectory, effective_hamiltonian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def brute_force_neighbors(values: np.ndarray):
    """Plain O(n^2) oracle for the neighbour kernel."""
    nn, nnn = [], []
    for k in range(values.size):
        order = sorted((abs(values[j] - values[k]), j) for j in range(values.size) if j != k)
        nn.append(order[0][1])
        nnn.append(order[1][1])
    return np.array(nn), np.array(nnn)


def _mbl(M: int = 4, W: float = 1.0):
    return model_from_params("mbl", M, W=W, disorder_seed=7)


def check_csr_affine_invariance() -> str:
    spec = sample_poisson_points(300, seed=1).eigenvalues
    z = csr_values(spec).z
    worst = 0.0
    for a, b in ((2j, 0.0), (0.7 - 1.3j, 3.0 + 2.0j), (-5.0, -1.0j)):
        worst = max(worst, float(np.max(np.abs(csr_values(a * spec + b).z - z))))
    assert worst <= 1e-9, f"ratios moved by {worst:.3e} under an affine map"
    return f"max deviation {worst:.2e}"


def check_ratios_in_unit_disc() -> str:
    samples = csr_values(sample_ginue(200, seed=2))
    r_max = float(np.max(np.abs(samples.valid_z)))
    assert r_max <= 1 + 1e-12, f"|z| reached {r_max!r}"
    return f"max |z| = {r_max:.6f}"


def check_neighbor_oracle() -> str:
    rng = stream(3, purpose="neighbor_check")
    values = rng.standard_normal(400) + 1j * rng.standard_normal(400)
    values[10] = values[11]         # exact duplicate
    nn, nnn, _ = neighbor_indices(values)
    bf_nn, bf_nnn = brute_force_neighbors(values)
    assert np.array_equal(nn, bf_nn) and np.array_equal(nnn, bf_nnn), "kernel differs from brute force"
    return f"{values.size} points identical"


def check_trace_preservation() -> str:
    worst = 0.0
    for model in (build_integrable_chain(3), _mbl(4), _mbl(6, W=5.0)):
        superop = build_superoperator(model)
        row = vec(np.eye(model.dim)) @ superop.matrix.entries
        worst = max(worst, float(np.max(np.abs(row))))
    assert worst <= 1e-10, f"trace row deviates by {worst:.3e}"
    return f"max |Tr L| row entry {worst:.2e}"


def check_superoperator_oracle() -> str:
    model = _mbl(4)
    rng = stream(4, purpose="rho_check")
    a = rng.standard_normal((model.dim, model.dim)) + 1j * rng.standard_normal((model.dim, model.dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    diff = np.max(np.abs(build_superoperator(model).apply(rho) - apply_lindbladian(model, rho)))
    assert diff <= 1e-12, f"vectorized and direct Lindbladian differ by {diff:.3e}"
    return f"max deviation {diff:.2e}"


def check_norm_monotonicity() -> str:
    model = _mbl(4)
    propagator = StepPropagator(effective_hamiltonian(model), 0.01)
    trajectory = Trajectory(neel_state(model.basis), model, propagator, JumpNoise.from_seed(5),
                            trace_stride=1)
    trajectory.advance(20.0)
    rows = trajectory.trace
    violations = sum(
        1 for prev, row in zip(rows, rows[1:])
        if not row.jump_flag and row.norm_sq > prev.norm_sq * (1 + 1e-12) + NORM_UNDERFLOW
    )
    assert violations == 0, f"{violations} norm increases between jumps"
    return f"{len(rows)} steps, {len(trajectory.jumps)} jumps"


def check_bisection_replay() -> str:
    rng = stream(6, purpose="bisection_check")
    o = sample_goe_observable(20, seed=6)
    worst = 0.0
    for _ in range(20):
        base = PureState(rng.standard_normal(20) + 1j * rng.standard_normal(20)).normalized()
        direction = PureState(random_direction(20, rng))
        delta0, tol = 1e-6, 1e-9
        eps = bisect_epsilon(base, direction, o, delta0, tol)
        perturbed = PureState(perturb_state(base.amplitudes, 1.0, direction.amplitudes, eps))
        residual = abs(observable_distance(o, base, perturbed) - delta0)
        assert residual <= tol, f"replayed distance off by {residual:.3e}"
        worst = max(worst, residual)
    return f"max residual {worst:.2e}"


def check_integrable_reality() -> str:
    worst = 0.0
    for M in (4, 5):
        spec = spectrum(build_superoperator(build_integrable_chain(M)), residual_samples=0)
        worst = max(worst, float(np.max(np.abs(spec.eigenvalues.imag))))
    assert worst <= 1e-8, f"max |Im lambda| = {worst:.3e}"
    return f"max |Im lambda| = {worst:.2e}"


DETERMINISM_CONFIG = """
schema_version: 1
experiment: le_sweep
model: {kind: mbl, M: 4, W_grid: [1.0, 8.0]}
trajectory: {dt: 0.01}
lyapunov: {tau: 1.0, n_renorms: 5, transient_time: 2.0}
sampling: {n_disorder: 2, n_traj: 2, master_seed: 11}
"""


def check_end_to_end_determinism() -> str:
    from core.harness import run_experiment
    from parsers.config_parser import parse_config

    cfg = parse_config(DETERMINISM_CONFIG)
    with tempfile.TemporaryDirectory() as tmp:
        first, second = Path(tmp) / "a", Path(tmp) / "b"
        run_experiment(cfg.with_overrides(out_dir=str(first)), resume=False)
        run_experiment(cfg.with_overrides(out_dir=str(second)), resume=False)
        for name in ("le_sweep.csv", "le_cells.csv"):
            assert filecmp.cmp(first / name, second / name, shallow=False), f"{name} differs between runs"
    return "le_sweep outputs byte-identical"


CHECKS: Dict[str, Callable[[], str]] = {
    "csr_affine_invariance": check_csr_affine_invariance,
    "csr_unit_disc": check_ratios_in_unit_disc,
    "neighbor_brute_force": check_neighbor_oracle,
    "trace_preservation": check_trace_preservation,
    "superoperator_oracle": check_superoperator_oracle,
    "norm_monotonicity": check_norm_monotonicity,
    "bisection_replay": check_bisection_replay,
    "integrable_spectrum_real": check_integrable_reality,
    "end_to_end_determinism": check_end_to_end_determinism,
}


def run_checks(names: List[str] = None) -> List[CheckResult]:
    results = []
    for name, check in CHECKS.items():
        if names and name not in names:
            continue
        try:
            results.append(CheckResult(name, True, check()))
        except Exception as e:
            logger.warning(f"Check {name} failed: {e}")
            results.append(CheckResult(name, False, f"{type(e).__name__}: {e}"))
    return results


def ginue_reference(n: int = 1000, runs: int = 50, seed: int = 0) -> Dict:
    """<r> and <cos theta> of GinUE ratios, pooled over runs matrices, to 3 digits."""
    samples = CsrSamples.merge([csr_values(sample_ginue(n, seed + r)) for r in range(runs)])
    summary = summarize(samples)
    return {
        "n": n, "runs": runs, "seed": seed,
        "n_samples": summary.n_samples,
        "mean_r": round(summary.mean_r, 3),
        "mean_cos_theta": round(summary.mean_cos_theta, 3),
    }
