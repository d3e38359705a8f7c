"""
Monte-Carlo wave-function engine.

Between jumps a state drifts under exp(-i H_eff dt); a jump fires at the
first step where the squared norm drops to the current threshold eta,
operator k is chosen with probability gamma_k ||L_k psi||^2 / sum, the
state is renormalized and a fresh eta is drawn.
"""
import copy
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    TRAJECTORY_DT, PROPAGATOR_LADDER_DEPTH, MONOTONE_NORM_TOL, NORM_REL_TOL, NORM_UNDERFLOW
)
from core.errors import DarkStateError, DimensionMismatchError, NumericError
from core.linalg import ComplexOperator, PureState, matexp, is_unit_norm
from core.models import LindbladModel
from core.parallel import map_cells
from core.seeding import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectiveHamiltonian:
    matrix: ComplexOperator
    base_label: str


@dataclass(frozen=True)
class TrajectoryConfig:
    dt: float = TRAJECTORY_DT
    transient_time: float = 0.0
    run_time: float = 10.0
    seed: int = 0
    jump_threshold_stream: str = "jumps"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.transient_time < 0 or self.run_time < 0:
            raise ValueError("transient_time and run_time must be >= 0")

    @property
    def total_time(self) -> float:
        return self.transient_time + self.run_time

    def steps(self, duration: float) -> int:
        """Number of dt steps covering duration (must be a multiple of dt)."""
        n = int(round(duration / self.dt))
        if abs(n * self.dt - duration) > 1e-9 * max(1.0, duration):
            raise ValueError(f"Duration {duration} is not a multiple of dt={self.dt}")
        return n


@dataclass(frozen=True)
class JumpEvent:
    time: float
    operator_index: int
    pre_norm_sq: float
    threshold: float


@dataclass(frozen=True)
class TraceRow:
    t: float
    norm_sq: float
    o_t: float
    jump_flag: int


class JumpNoise:
    """
    Jump randomness of one trajectory: a threshold stream and a selection
    stream. Cloning copies the generator states, so two trajectories holding
    clones consume an identical noise realization.
    """

    def __init__(self, threshold_rng: np.random.Generator, selection_rng: np.random.Generator):
        self._thresholds = threshold_rng
        self.selection = selection_rng
        self.threshold = self._draw_threshold()

    @classmethod
    def from_seed(cls, master_seed: int, *path: int, tag: str = "jumps") -> "JumpNoise":
        return cls(
            stream(master_seed, *path, purpose=f"{tag}/threshold"),
            stream(master_seed, *path, purpose=f"{tag}/selection"),
        )

    def renew(self):
        self.threshold = self._draw_threshold()

    def clone(self) -> "JumpNoise":
        return copy.deepcopy(self)

    def _draw_threshold(self) -> float:
        eta = self._thresholds.random()
        while eta == 0.0:
            eta = self._thresholds.random()
        return eta


class StepPropagator:
    """Ladder exp(-i H_eff dt)^(2^j), j = 0..depth, computed once per model."""

    def __init__(self, heff: EffectiveHamiltonian, dt: float, depth: int = PROPAGATOR_LADDER_DEPTH):
        self.dt = dt
        step = matexp(ComplexOperator(-1j * heff.matrix.entries), dt).entries
        self.ladder = [step]
        for _ in range(depth):
            self.ladder.append(self.ladder[-1] @ self.ladder[-1])
        logger.debug(f"Propagator ladder for {heff.base_label}: depth {depth}, dt={dt}")

    @property
    def step(self) -> np.ndarray:
        return self.ladder[0]


# --- Operations ---

def effective_hamiltonian(model: LindbladModel) -> EffectiveHamiltonian:
    """H_eff = H - (i/2) sum_k gamma_k L_k^dag L_k"""
    heff = model.hamiltonian.entries.astype(np.complex128)
    for op, rate in model.jumps:
        l = op.entries
        heff = heff - 0.5j * rate * (l.conj().T @ l)
    return EffectiveHamiltonian(matrix=ComplexOperator(heff), base_label=model.label)


def jump_weights(amplitudes: np.ndarray, operators: Sequence[np.ndarray], rates: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """gamma_k ||L_k psi||^2 for every k, plus the images L_k psi."""
    images = [op @ amplitudes for op in operators]
    weights = np.array([rate * np.vdot(v, v).real for v, rate in zip(images, rates)], dtype=float)
    return weights, images


def select_jump(weights: np.ndarray, u: float) -> int:
    """Index k with P(k) proportional to weights[k], driven by a uniform u in [0, 1)."""
    cumulative = np.cumsum(weights)
    total = cumulative[-1]
    if not total > 0:
        raise DarkStateError("All jump weights vanish (dark state)")
    k = int(np.searchsorted(cumulative, u * total, side="right"))
    return min(k, len(weights) - 1)


def perform_jump(psi: PureState, model: LindbladModel, rng: np.random.Generator) -> Tuple[PureState, int]:
    """Apply a randomly selected jump operator and reset the norm to one."""
    if not model.jumps:
        raise DarkStateError(f"{model.label}: model has no jump operators")
    weights, images = jump_weights(psi.amplitudes, [op.entries for op in model.jump_operators], model.rates)
    k = select_jump(weights, rng.random())
    image = images[k]
    return PureState(image / np.sqrt(np.vdot(image, image).real)), k


class Trajectory:
    """
    Stateful unraveled trajectory. The state is kept unnormalized between
    jumps; advance() moves it forward by whole dt steps.
    """

    def __init__(
        self,
        psi0: PureState,
        model: LindbladModel,
        propagator: StepPropagator,
        noise: JumpNoise,
        observable: Optional[ComplexOperator] = None,
        trace_stride: Optional[int] = None,
        start_time: float = 0.0
    ):
        if psi0.dim != model.dim:
            raise DimensionMismatchError(f"State dim {psi0.dim} vs model dim {model.dim}")
        self.model = model
        self.propagator = propagator
        self.noise = noise
        self.psi = psi0.amplitudes.copy()
        self.norm_sq = psi0.norm_sq
        self.start_time = start_time
        self.step_count = 0
        self.jumps: List[JumpEvent] = []
        self.dark_events = 0
        self.observable = observable
        self.trace_stride = trace_stride
        self.trace: List[TraceRow] = []
        self._operators = [op.entries for op in model.jump_operators]
        self._rates = model.rates
        self._jumps_at_last_row = 0
        if trace_stride:
            self._record_row()

    @property
    def dt(self) -> float:
        return self.propagator.dt

    @property
    def time(self) -> float:
        return self.start_time + self.step_count * self.dt

    def state(self) -> PureState:
        return PureState(self.psi)

    def set_state(self, psi: PureState):
        if psi.dim != self.model.dim:
            raise DimensionMismatchError(f"State dim {psi.dim} vs model dim {self.model.dim}")
        self.psi = psi.amplitudes.copy()
        self.norm_sq = psi.norm_sq

    def advance(self, duration: float):
        n = int(round(duration / self.dt))
        if abs(n * self.dt - duration) > 1e-9 * max(1.0, duration):
            raise ValueError(f"Duration {duration} is not a multiple of dt={self.dt}")
        self.advance_steps(n)

    def advance_steps(self, n_steps: int):
        target = self.step_count + n_steps
        while self.step_count < target:
            segment_end = target
            if self.trace_stride:
                next_row = (self.step_count // self.trace_stride + 1) * self.trace_stride
                segment_end = min(target, next_row)
            self._run_segment(segment_end - self.step_count)
            if self.trace_stride and self.step_count % self.trace_stride == 0:
                self._record_row()

    # --- Private methods ---

    def _run_segment(self, n_steps: int):
        remaining = n_steps
        while remaining > 0:
            advanced, crossing = self._drift(remaining)
            remaining -= advanced
            if crossing is not None:
                self.psi, self.norm_sq = crossing
                self.step_count += 1
                remaining -= 1
                self._jump()

    def _drift(self, remaining: int):
        """
        Advance by the largest s <= remaining steps that keeps norm_sq above
        the threshold. The norm is non-increasing between jumps, so binary
        descent over the ladder finds s exactly. If step s+1 fits in the
        segment, its (crossing) state is returned as well.
        """
        eta = self.noise.threshold
        advanced = 0
        crossing = None
        top = min(len(self.propagator.ladder) - 1, remaining.bit_length() - 1)
        for j in range(top, -1, -1):
            block = 1 << j
            while block <= remaining - advanced:
                candidate = self.propagator.ladder[j] @ self.psi
                norm_sq = float(np.vdot(candidate, candidate).real)
                if norm_sq > self.norm_sq * (1.0 + MONOTONE_NORM_TOL * block) + NORM_UNDERFLOW:
                    raise NumericError(
                        f"{self.model.label}: norm grew from {self.norm_sq:.15g} to {norm_sq:.15g} between jumps"
                    )
                if norm_sq > eta:
                    self.psi, self.norm_sq = candidate, norm_sq
                    self.step_count += block
                    advanced += block
                else:
                    if j == 0:
                        crossing = (candidate, norm_sq)
                    break
        return advanced, crossing

    def _jump(self):
        pre_norm_sq = self.norm_sq
        eta = self.noise.threshold
        u = self.noise.selection.random()
        if not self._operators:
            self._dark(pre_norm_sq)
            return
        weights, images = jump_weights(self.psi, self._operators, self._rates)
        if not np.sum(weights) > NORM_UNDERFLOW:
            self._dark(pre_norm_sq)
            return
        k = select_jump(weights, u)
        image = images[k]
        self.psi = image / np.sqrt(np.vdot(image, image).real)
        self.norm_sq = 1.0
        self.jumps.append(JumpEvent(time=self.time, operator_index=k, pre_norm_sq=pre_norm_sq, threshold=eta))
        self.noise.renew()

    def _dark(self, pre_norm_sq: float):
        logger.warning(f"{self.model.label}: dark state at t={self.time:.4g}, continuing without jump")
        self.dark_events += 1
        self.psi = self.psi / np.sqrt(pre_norm_sq)
        self.norm_sq = 1.0
        self.noise.renew()

    def _record_row(self):
        if self.observable is not None and self.norm_sq > NORM_UNDERFLOW:
            o_t = float(np.vdot(self.psi, self.observable.entries @ self.psi).real) / self.norm_sq
        else:
            o_t = float("nan")
        jumped = int(len(self.jumps) > self._jumps_at_last_row)
        self._jumps_at_last_row = len(self.jumps)
        self.trace.append(TraceRow(t=self.time, norm_sq=self.norm_sq, o_t=o_t, jump_flag=jumped))


def evolve_trajectory(
    psi0: PureState,
    heff: EffectiveHamiltonian,
    model: LindbladModel,
    cfg: TrajectoryConfig,
    rng: Optional[JumpNoise] = None,
    propagator: Optional[StepPropagator] = None
) -> Tuple[PureState, List[JumpEvent]]:
    """Evolve psi0 for cfg.total_time; returns the (unnormalized) end state and the jump log."""
    if not is_unit_norm(psi0, NORM_REL_TOL):
        raise ValueError(f"psi0 must be unit norm, got norm_sq={psi0.norm_sq}")
    propagator = propagator or StepPropagator(heff, cfg.dt)
    noise = rng or JumpNoise.from_seed(cfg.seed, tag=cfg.jump_threshold_stream)
    trajectory = Trajectory(psi0, model, propagator, noise)
    trajectory.advance_steps(cfg.steps(cfg.total_time))
    if trajectory.dark_events:
        logger.warning(f"{model.label}: {trajectory.dark_events} dark-state events")
    return trajectory.state(), trajectory.jumps


def ensemble_average(trajectories: Sequence[PureState]) -> np.ndarray:
    """(1/n) sum_i |psi_i><psi_i| over unit-normalized snapshots."""
    if not trajectories:
        raise ValueError("Cannot average an empty ensemble")
    dims = {psi.dim for psi in trajectories}
    if len(dims) != 1:
        raise DimensionMismatchError(f"Snapshots disagree on dim: {sorted(dims)}")
    bad = [i for i, psi in enumerate(trajectories) if abs(psi.norm_sq - 1.0) > NORM_REL_TOL]
    if bad:
        raise ValueError(f"Snapshots {bad[:5]} are not unit-normalized")
    amplitudes = np.stack([psi.amplitudes for psi in trajectories])
    return amplitudes.T @ amplitudes.conj() / len(trajectories)


# --- Ensembles ---

@dataclass(frozen=True)
class EnsembleTask:
    model: LindbladModel
    psi0: PureState
    t_final: float
    dt: float
    master_seed: int
    disorder_index: int
    trajectory_indices: Tuple[int, ...] = field(default_factory=tuple)


def _run_ensemble_chunk(task: EnsembleTask) -> List[PureState]:
    heff = effective_hamiltonian(task.model)
    propagator = StepPropagator(heff, task.dt)
    n_steps = int(round(task.t_final / task.dt))
    snapshots = []
    for i in task.trajectory_indices:
        noise = JumpNoise.from_seed(task.master_seed, task.disorder_index, i, tag="ensemble")
        trajectory = Trajectory(task.psi0, task.model, propagator, noise)
        trajectory.advance_steps(n_steps)
        snapshots.append(trajectory.state().normalized())
    return snapshots


def run_ensemble(
    model: LindbladModel,
    psi0: PureState,
    t_final: float,
    n_traj: int,
    master_seed: int,
    dt: float = TRAJECTORY_DT,
    disorder_index: int = 0,
    workers: int = 1,
    chunk_size: int = 100
) -> List[PureState]:
    """Normalized snapshots at t_final of n_traj independent trajectories."""
    tasks = [
        EnsembleTask(model, psi0, t_final, dt, master_seed, disorder_index,
                     tuple(range(start, min(start + chunk_size, n_traj))))
        for start in range(0, n_traj, chunk_size)
    ]
    chunks = map_cells(_run_ensemble_chunk, tasks, workers=workers, desc="trajectories")
    return [psi for chunk in chunks for psi in chunk]
