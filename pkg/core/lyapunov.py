"""
Largest Lyapunov exponent of an unraveled Lindbladian.

A base and a perturbed trajectory evolve with the same jump noise; their
observable distance is renormalized back to delta0 every tau and the
logarithmic growth factors are averaged.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    DELTA0, TAU_MBL, N_RENORMS, BISECT_REL_TOL, BISECT_MAX_ITER, BISECT_MAX_DOUBLINGS,
    MAX_DEGENERATE_DIRECTIONS, DISTANCE_FLOOR, NORM_UNDERFLOW
)
from core.errors import DirectionDegenerateError, EstimateAbortedError, DimensionMismatchError
from core.linalg import ComplexOperator, PureState, expectation_value
from core.models import LindbladModel, model_from_params, neel_state, sample_goe_observable
from core.parallel import map_cells
from core.seeding import stream, derive_seed
from core.unravel import (
    TrajectoryConfig, JumpEvent, JumpNoise, StepPropagator, Trajectory, effective_hamiltonian, TraceRow
)

logger = logging.getLogger(__name__)

DIFFERENCE = "difference"
RANDOM = "random"
MODEL_HAMILTONIAN = "model_hamiltonian"
GOE_RANDOM = "goe_random"


@dataclass(frozen=True)
class LyapunovConfig:
    delta0: float = DELTA0
    tau: float = TAU_MBL
    n_renorms: int = N_RENORMS
    transient_time: float = 0.0
    bisect_tol: Optional[float] = None      # defaults to BISECT_REL_TOL * delta0
    bisect_max_iter: int = BISECT_MAX_ITER
    renorm_direction: str = DIFFERENCE
    observable_kind: str = MODEL_HAMILTONIAN
    observable_seed: int = 0

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ValueError(f"delta0 must be > 0, got {self.delta0}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.n_renorms < 1:
            raise ValueError(f"n_renorms must be >= 1, got {self.n_renorms}")
        if self.transient_time < 0:
            raise ValueError(f"transient_time must be >= 0, got {self.transient_time}")
        if self.renorm_direction not in (DIFFERENCE, RANDOM):
            raise ValueError(f"renorm_direction must be '{DIFFERENCE}' or '{RANDOM}'")
        if self.observable_kind not in (MODEL_HAMILTONIAN, GOE_RANDOM):
            raise ValueError(f"observable_kind must be '{MODEL_HAMILTONIAN}' or '{GOE_RANDOM}'")
        if self.bisect_tol is None:
            object.__setattr__(self, "bisect_tol", BISECT_REL_TOL * self.delta0)

    def check_against(self, tcfg: TrajectoryConfig):
        if not self.tau > tcfg.dt:
            raise ValueError(f"tau={self.tau} must exceed trajectory dt={tcfg.dt}")
        tcfg.steps(self.tau)
        tcfg.steps(self.transient_time)


@dataclass(frozen=True)
class GrowthRecord:
    k: int
    t_k: float
    delta_tk: float
    d_k: float
    log_dk: float


@dataclass(frozen=True)
class DistanceRow:
    t: float
    o_base: float
    o_perturbed: float
    distance: float
    base_jump: int
    perturbed_jump: int


@dataclass
class LyapunovEstimate:
    exponent: float
    records: List[GrowthRecord]
    seeds: Tuple[int, ...]
    model_label: str
    tau: float
    base_jumps: List[JumpEvent] = field(default_factory=list)
    perturbed_jumps: List[JumpEvent] = field(default_factory=list)
    direction_redraws: int = 0
    distance_trace: List[DistanceRow] = field(default_factory=list)
    base_trace: List[TraceRow] = field(default_factory=list)

    @property
    def accounting_residual(self) -> float:
        """|lambda K tau - sum ln d_k|, zero up to rounding."""
        total = sum(r.log_dk for r in self.records)
        return abs(self.exponent * len(self.records) * self.tau - total)


# --- Distance and perturbation ---

def observable_distance(o: ComplexOperator, psi_b: PureState, psi_v: PureState) -> float:
    """|<O>_b - <O>_v| on normalized expectations."""
    if psi_b.dim != psi_v.dim or o.dim != psi_b.dim:
        raise DimensionMismatchError(f"dims: O {o.dim}, base {psi_b.dim}, perturbed {psi_v.dim}")
    return _distance(o.entries, psi_b.amplitudes, psi_v.amplitudes)


def _distance(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return abs(expectation_value(o, a) - expectation_value(o, b))


def random_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vector with real amplitudes drawn uniformly from [-1, 1]."""
    r = rng.uniform(-1.0, 1.0, size=dim).astype(np.complex128)
    return r / np.linalg.norm(r)


def perturb_state(base: np.ndarray, base_norm: float, direction: np.ndarray, eps: float) -> np.ndarray:
    """normalize(psi_b + eps r) * ||psi_b||"""
    v = base + eps * direction
    return v * (base_norm / np.linalg.norm(v))


def bisect_epsilon(
    base: PureState,
    direction: PureState,
    o: ComplexOperator,
    delta0: float,
    tol: float,
    max_iter: int = BISECT_MAX_ITER
) -> float:
    """
    Perturbation size eps with |Delta(eps) - delta0| <= tol.

    The bracket starts at eps = delta0 and doubles until Delta(eps) >= delta0;
    the bracket is then bisected. Raises DirectionDegenerateError when the
    direction cannot move the observable far enough.
    """
    if delta0 == 0:
        return 0.0
    if abs(direction.norm_sq - 1.0) > 1e-10:
        raise ValueError(f"direction must be unit-normalized, got norm_sq={direction.norm_sq}")
    if base.norm_sq < NORM_UNDERFLOW:
        raise DirectionDegenerateError(f"base state is degenerate (norm_sq={base.norm_sq:.3e})")

    ops, psi, r = o.entries, base.amplitudes, direction.amplitudes
    base_norm = np.sqrt(base.norm_sq)
    o_base = expectation_value(ops, psi, base.norm_sq)
    delta = lambda eps: abs(o_base - expectation_value(ops, perturb_state(psi, base_norm, r, eps)))

    lo, hi = 0.0, delta0
    d_hi = delta(hi)
    doublings = 0
    while d_hi < delta0:
        if doublings >= min(max_iter, BISECT_MAX_DOUBLINGS):
            raise DirectionDegenerateError(
                f"no bracket after {doublings} doublings (Delta={d_hi:.3e} < delta0={delta0:.3e})"
            )
        lo, hi = hi, 2.0 * hi
        d_hi = delta(hi)
        doublings += 1
    if abs(d_hi - delta0) <= tol:
        return hi

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        d_mid = delta(mid)
        if abs(d_mid - delta0) <= tol:
            return mid
        if d_mid < delta0:
            lo = mid
        else:
            hi = mid
    raise DirectionDegenerateError(f"bisection did not converge in {max_iter} iterations")


def make_perturbed(
    base: PureState,
    direction_src: Union[np.random.Generator, np.ndarray],
    o: ComplexOperator,
    cfg: LyapunovConfig
) -> PureState:
    """
    Perturbed partner of base at observable distance delta0 (within tol),
    with the same norm. direction_src is a generator (random direction) or
    a vector whose direction is used (usually the current difference).
    """
    if not base.norm_sq > 0:
        raise DirectionDegenerateError("base state has zero norm")
    if isinstance(direction_src, np.random.Generator):
        r = random_direction(base.dim, direction_src)
    else:
        r = np.asarray(direction_src, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(r)
        if not norm > 0:
            raise DirectionDegenerateError("difference direction vanishes")
        r = r / norm
    eps = bisect_epsilon(base, PureState(r), o, cfg.delta0, cfg.bisect_tol, cfg.bisect_max_iter)
    return PureState(perturb_state(base.amplitudes, np.sqrt(base.norm_sq), r, eps))


# --- Estimation ---

def estimate_le(
    model: LindbladModel,
    o: ComplexOperator,
    tcfg: TrajectoryConfig,
    lcfg: LyapunovConfig,
    rng: Optional[Tuple[int, ...]] = None,
    psi0: Optional[PureState] = None,
    propagator: Optional[StepPropagator] = None,
    trace_stride: Optional[int] = None
) -> LyapunovEstimate:
    """
    Run one base/perturbed pair. rng is the seed path (master_seed, *indices)
    of the pair; it defaults to (tcfg.seed,). The initial state defaults to
    the Neel state of the model's basis.
    """
    lcfg.check_against(tcfg)
    seeds = tuple(rng) if rng is not None else (tcfg.seed,)
    psi0 = psi0 or neel_state(model.basis)
    propagator = propagator or StepPropagator(effective_hamiltonian(model), tcfg.dt)
    directions = stream(*seeds, purpose="perturbation_direction")
    tau_steps = tcfg.steps(lcfg.tau)

    base = Trajectory(psi0, model, propagator, JumpNoise.from_seed(*seeds, tag="pair"),
                      observable=o, trace_stride=trace_stride)
    base.advance(lcfg.transient_time)
    t0 = base.time
    base_jumps_before = len(base.jumps)

    redraws = 0

    def perturbed_partner(difference: Optional[np.ndarray]) -> PureState:
        nonlocal redraws
        failures = 0
        source = difference if difference is not None else directions
        while True:
            try:
                return make_perturbed(base.state(), source, o, lcfg)
            except DirectionDegenerateError as e:
                failures += 1
                redraws += 1
                logger.debug(f"{model.label}: degenerate direction at t={base.time:.4g}: {e}")
                if failures > MAX_DEGENERATE_DIRECTIONS:
                    raise EstimateAbortedError(
                        f"{model.label}: {failures} consecutive degenerate directions at t={base.time:.4g}"
                    ) from e
                source = directions

    perturbed = Trajectory(perturbed_partner(None), model, propagator, base.noise.clone(),
                           observable=o, trace_stride=trace_stride, start_time=t0)

    records = []
    for k in range(1, lcfg.n_renorms + 1):
        base.advance_steps(tau_steps)
        perturbed.advance_steps(tau_steps)
        delta = _distance(o.entries, base.psi, perturbed.psi)
        if delta < DISTANCE_FLOOR:
            logger.debug(f"{model.label}: distance collapsed at k={k}, floored")
            delta = DISTANCE_FLOOR
        d_k = delta / lcfg.delta0
        records.append(GrowthRecord(k=k, t_k=k * lcfg.tau, delta_tk=delta, d_k=d_k, log_dk=float(np.log(d_k))))

        if k < lcfg.n_renorms:
            difference = perturbed.psi - base.psi if lcfg.renorm_direction == DIFFERENCE else None
            if difference is not None and not np.linalg.norm(difference) > 0:
                difference = None
            perturbed.set_state(perturbed_partner(difference))
            # Resynchronize the noise so both consume the same future draws.
            perturbed.noise = base.noise.clone()

    exponent = sum(r.log_dk for r in records) / (len(records) * lcfg.tau)
    estimate = LyapunovEstimate(
        exponent=exponent,
        records=records,
        seeds=seeds,
        model_label=model.label,
        tau=lcfg.tau,
        base_jumps=base.jumps[base_jumps_before:],
        perturbed_jumps=list(perturbed.jumps),
        direction_redraws=redraws,
    )
    if trace_stride:
        estimate.distance_trace = _merge_traces(base, perturbed, t0)
        estimate.base_trace = [row for row in base.trace if row.t >= t0 - 0.5 * base.dt]
    logger.debug(f"{model.label} seeds={seeds}: lambda={exponent:.6g}")
    return estimate


def _merge_traces(base: Trajectory, perturbed: Trajectory, t0: float) -> List[DistanceRow]:
    key = lambda t: int(round(t / base.dt))
    base_rows = {key(row.t): row for row in base.trace if row.t >= t0 - 0.5 * base.dt}
    merged = []
    for row in perturbed.trace:
        match = base_rows.get(key(row.t))
        if match is None:
            continue
        merged.append(DistanceRow(
            t=row.t, o_base=match.o_t, o_perturbed=row.o_t,
            distance=abs(match.o_t - row.o_t),
            base_jump=match.jump_flag, perturbed_jump=row.jump_flag,
        ))
    return merged


# --- Cells and ensembles ---

@dataclass(frozen=True)
class LeTask:
    """One independent base/perturbed pair, fully described by plain values."""
    key: Tuple
    model_params: Dict
    observable: Tuple       # ("model_hamiltonian",) or ("goe_random", seed)
    tcfg: TrajectoryConfig
    lcfg: LyapunovConfig
    seed_path: Tuple[int, ...]


@dataclass(frozen=True)
class LeCell:
    key: Tuple
    status: str
    exponent: float = float("nan")
    error: str = ""
    n_jumps: int = 0
    params: Dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def resolve_observable(model: LindbladModel, observable: Tuple) -> ComplexOperator:
    if observable[0] == MODEL_HAMILTONIAN:
        return model.hamiltonian
    if observable[0] == GOE_RANDOM:
        return sample_goe_observable(model.dim, observable[1])
    raise ValueError(f"Unknown observable kind: {observable[0]}")


def run_le_cell(task: LeTask) -> LeCell:
    """Cell runner: failures are returned as quarantined cells, never raised."""
    try:
        model = model_from_params(**task.model_params)
        o = resolve_observable(model, task.observable)
        estimate = estimate_le(model, o, task.tcfg, task.lcfg, rng=task.seed_path)
        return LeCell(key=task.key, status="ok", exponent=estimate.exponent,
                      n_jumps=len(estimate.base_jumps), params=dict(task.model_params))
    except Exception as e:
        logger.warning(f"Cell {task.key} failed: {e}")
        return LeCell(key=task.key, status="failed", error=f"{type(e).__name__}: {e}",
                      params=dict(task.model_params))


def run_le_cells(
    tasks: Sequence[LeTask],
    workers: int = 1,
    completed: Optional[Dict[Tuple, LeCell]] = None,
    on_cell: Optional[Callable[[LeCell], None]] = None,
    desc: str = "pairs",
    show_progress: bool = False
) -> List[LeCell]:
    """Run tasks not already in completed; results come back in task order."""
    completed = completed or {}
    pending = [t for t in tasks if t.key not in completed]
    if len(pending) < len(tasks):
        logger.info(f"Resuming: {len(tasks) - len(pending)} of {len(tasks)} cells already done")
    callback = (lambda i, cell: on_cell(cell)) if on_cell else None
    fresh = map_cells(run_le_cell, pending, workers=workers, desc=desc,
                      on_result=callback, show_progress=show_progress)
    by_key = dict(completed)
    by_key.update((cell.key, cell) for cell in fresh)
    return [by_key[t.key] for t in tasks]


def le_distribution_tasks(
    model_params: Dict,
    n_observables: int,
    n_pairs: int,
    tcfg: TrajectoryConfig,
    lcfg: LyapunovConfig,
    master_seed: int
) -> List[LeTask]:
    """Observables x pairs on one model; GOE observables unless lcfg says otherwise."""
    tasks = []
    for i in range(n_observables):
        if lcfg.observable_kind == GOE_RANDOM:
            observable = (GOE_RANDOM, derive_seed(master_seed, i, purpose="observable"))
        else:
            observable = (MODEL_HAMILTONIAN,)
        for p in range(n_pairs):
            tasks.append(LeTask(key=(i, p), model_params=dict(model_params), observable=observable,
                                tcfg=tcfg, lcfg=lcfg, seed_path=(master_seed, i, p)))
    return tasks


def le_distribution(
    model_params: Dict,
    n_observables: int,
    n_pairs: int,
    tcfg: TrajectoryConfig,
    lcfg: LyapunovConfig,
    master_seed: int,
    workers: int = 1
) -> List[LeCell]:
    tasks = le_distribution_tasks(model_params, n_observables, n_pairs, tcfg, lcfg, master_seed)
    return run_le_cells(tasks, workers=workers, desc="le_distribution")


def le_sweep_tasks(
    model_params: Dict,
    W_grid: Sequence[float],
    n_disorder: int,
    n_traj: int,
    tcfg: TrajectoryConfig,
    lcfg: LyapunovConfig,
    master_seed: int
) -> List[LeTask]:
    """
    Cells over (W, disorder, pair). Disorder and noise seeds depend on the
    disorder and pair indices only, so every W sees the same realizations.
    """
    if not W_grid:
        raise ValueError("W_grid must be non-empty")
    if n_disorder < 1 or n_traj < 1:
        raise ValueError("n_disorder and n_traj must be >= 1")
    tasks = []
    for W in W_grid:
        for d in range(n_disorder):
            disorder_seed = derive_seed(master_seed, d, purpose="disorder")
            if lcfg.observable_kind == GOE_RANDOM:
                observable = (GOE_RANDOM, derive_seed(master_seed, d, purpose="observable"))
            else:
                observable = (MODEL_HAMILTONIAN,)
            params = dict(model_params, W=float(W), disorder_seed=disorder_seed)
            for p in range(n_traj):
                tasks.append(LeTask(key=(float(W), d, p), model_params=params, observable=observable,
                                    tcfg=tcfg, lcfg=lcfg, seed_path=(master_seed, d, p)))
    return tasks


@dataclass(frozen=True)
class SweepRow:
    W: float
    mean_lambda: float
    stderr: float
    n_cells: int


def aggregate_sweep(cells: Sequence[LeCell]) -> List[SweepRow]:
    """Mean and standard error per W over the cells that succeeded."""
    grid = []
    for cell in cells:
        if cell.key[0] not in grid:
            grid.append(cell.key[0])
    rows = []
    for W in grid:
        values = np.array([c.exponent for c in cells if c.key[0] == W and c.ok])
        n = values.size
        mean = float(np.mean(values)) if n else float("nan")
        stderr = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        rows.append(SweepRow(W=W, mean_lambda=mean, stderr=stderr, n_cells=n))
    return rows


def le_sweep(
    model_params: Dict,
    W_grid: Sequence[float],
    n_disorder: int,
    n_traj: int,
    tcfg: TrajectoryConfig,
    lcfg: LyapunovConfig,
    master_seed: int,
    workers: int = 1
) -> Tuple[List[SweepRow], List[LeCell]]:
    tasks = le_sweep_tasks(model_params, W_grid, n_disorder, n_traj, tcfg, lcfg, master_seed)
    cells = run_le_cells(tasks, workers=workers, desc="le_sweep")
    failed = sum(not c.ok for c in cells)
    if failed:
        logger.warning(f"le_sweep: {failed} of {len(cells)} cells failed")
    return aggregate_sweep(cells), cells


# --- Distribution summaries ---

def gaussian_fit(values: Sequence[float]) -> Dict[str, float]:
    """Normal fit (mean, sample sigma) plus skewness of an exponent sample."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("gaussian_fit needs at least two values")
    return {
        "n": int(values.size),
        "mean": float(np.mean(values)),
        "sigma": float(np.std(values, ddof=1)),
        "skewness": float(stats.skew(values)),
        "stderr": float(np.std(values, ddof=1) / np.sqrt(values.size)),
    }


def histogram_density(values: Sequence[float], bins: int = 30) -> Tuple[np.ndarray, np.ndarray]:
    """(edges, density) with unit mass."""
    density, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, density=True)
    return edges, density
