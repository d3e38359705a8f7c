"""
Experiment Config Parser - YAML experiment descriptions

Every error found is collected and raised together in one ConfigError;
unknown keys are reported with their dotted path.
"""
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
import hashlib
import json
import logging

import yaml

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    CONFIG_SCHEMA_VERSION, EXPERIMENT_KINDS, MODEL_KINDS, MAX_SPIN_SITES,
    DEFAULT_J, DEFAULT_U, DEFAULT_GAMMA, DEFAULT_W,
    DEFAULT_ETA_B1, DEFAULT_KAPPA_B1, DEFAULT_GAMMA_B1,
    TRAJECTORY_DT, DELTA0, TAU_INTEGRABLE, TAU_MBL, N_RENORMS,
    TRANSIENT_INTEGRABLE, TRANSIENT_MBL, BISECT_MAX_ITER,
    CSR_BINS, CSR_MARGINAL_BINS, CSR_STRIPE_HALFWIDTH, CSR_DEPLETION_RADIUS, CSR_DROP_STATIONARY,
    DEFAULT_MASTER_SEED, RESULTS_DIR, TRACE_STRIDE, SUPEROPERATOR_MAX_DIM
)
from core.errors import ConfigError

logger = logging.getLogger(__name__)

REFERENCE_ENSEMBLES = ("ginue", "poisson")
OUTPUT_FORMATS = ("csv", "json", "npy")


@dataclass(frozen=True)
class ModelBlock:
    kind: str
    M: int
    W: float = DEFAULT_W
    W_grid: Tuple[float, ...] = ()
    J: float = DEFAULT_J
    U: float = DEFAULT_U
    gamma: float = DEFAULT_GAMMA
    eta: int = DEFAULT_ETA_B1
    kappa: int = DEFAULT_KAPPA_B1

    def params(self, W: Optional[float] = None) -> Dict[str, Any]:
        """Keyword arguments for models.model_from_params."""
        return {
            "kind": self.kind, "M": self.M, "W": self.W if W is None else W,
            "J": self.J, "U": self.U, "gamma": self.gamma, "eta": self.eta, "kappa": self.kappa,
        }


@dataclass(frozen=True)
class TrajectoryBlock:
    dt: float = TRAJECTORY_DT
    transient_time: float = 0.0
    run_time: float = 10.0
    trace_stride: int = TRACE_STRIDE


@dataclass(frozen=True)
class LyapunovBlock:
    delta0: float = DELTA0
    tau: float = TAU_MBL
    n_renorms: int = N_RENORMS
    transient_time: float = TRANSIENT_MBL
    bisect_tol: Optional[float] = None     # None: BISECT_REL_TOL * delta0
    bisect_max_iter: int = BISECT_MAX_ITER
    renorm_direction: str = "difference"
    observable_kind: str = "model_hamiltonian"
    n_observables: int = 1


@dataclass(frozen=True)
class CsrBlock:
    bins: int = CSR_BINS
    marginal_bins: int = CSR_MARGINAL_BINS
    stripe_halfwidth: float = CSR_STRIPE_HALFWIDTH
    depletion_radius: float = CSR_DEPLETION_RADIUS
    drop_stationary: bool = CSR_DROP_STATIONARY
    reference_ensembles: Tuple[str, ...] = ()
    reference_n: int = 500
    reference_runs: int = 20


@dataclass(frozen=True)
class SamplingBlock:
    n_disorder: int = 1
    n_traj: int = 1
    master_seed: int = DEFAULT_MASTER_SEED


@dataclass(frozen=True)
class OutputBlock:
    directory: str = str(RESULTS_DIR)
    formats: Tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int
    experiment_kind: str
    model: ModelBlock
    trajectory: TrajectoryBlock = field(default_factory=TrajectoryBlock)
    lyapunov: LyapunovBlock = field(default_factory=LyapunovBlock)
    csr: CsrBlock = field(default_factory=CsrBlock)
    sampling: SamplingBlock = field(default_factory=SamplingBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @property
    def W_values(self) -> Tuple[float, ...]:
        return self.model.W_grid or (self.model.W,)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["experiment"] = data.pop("experiment_kind")
        return _lists(data)

    def config_hash(self) -> str:
        """Stable hash of the normalized config, used to match resumed runs."""
        return hashlib.md5(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def with_overrides(self, master_seed: Optional[int] = None, out_dir: Optional[str] = None) -> "ExperimentConfig":
        """Apply CLI flag overrides and re-validate."""
        data = self.to_dict()
        if master_seed is not None:
            data["sampling"]["master_seed"] = master_seed
        if out_dir is not None:
            data["output"]["directory"] = str(out_dir)
        return build_config(data)


def _lists(value):
    if isinstance(value, dict):
        return {k: _lists(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_lists(v) for v in value]
    return value


# --- Parsing ---

def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment config."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError([f"YAML syntax error{where}: {problem}"]) from e
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping at top level"])
    return build_config(data)


def load_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config not found: {path}")
    logger.info(f"Loading config: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


class _Reader:
    """Pulls typed fields out of one block, recording every problem."""

    def __init__(self, errors: List[str], data: Any, prefix: str):
        self.errors = errors
        self.prefix = prefix
        if data is None:
            data = {}
        if not isinstance(data, dict):
            errors.append(f"{prefix}: must be a mapping")
            data = {}
        self.data = data
        self.seen = set()

    def _path(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def get(self, key: str, kind: type, default: Any = None, required: bool = False, check=None, message: str = ""):
        self.seen.add(key)
        if key not in self.data:
            if required:
                self.errors.append(f"{self._path(key)}: required field missing")
            return default
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and isinstance(value, bool) or not isinstance(value, kind):
            self.errors.append(f"{self._path(key)}: expected {kind.__name__}, got {value!r}")
            return default
        if check is not None and not check(value):
            self.errors.append(f"{self._path(key)}: {message} (got {value!r})")
            return default
        return value

    def get_list(self, key: str, kind: type, default: Tuple = (), check=None, message: str = "") -> Tuple:
        self.seen.add(key)
        if key not in self.data:
            return default
        value = self.data[key]
        if not isinstance(value, list):
            self.errors.append(f"{self._path(key)}: expected a list, got {value!r}")
            return default
        items = []
        for i, item in enumerate(value):
            if kind is float and isinstance(item, int) and not isinstance(item, bool):
                item = float(item)
            if not isinstance(item, kind) or isinstance(item, bool) and kind is not bool:
                self.errors.append(f"{self._path(key)}[{i}]: expected {kind.__name__}, got {item!r}")
            elif check is not None and not check(item):
                self.errors.append(f"{self._path(key)}[{i}]: {message} (got {item!r})")
            else:
                items.append(item)
        return tuple(items)

    def finish(self):
        for key in sorted(set(self.data) - self.seen, key=str):
            self.errors.append(f"{self._path(str(key))}: unknown key")


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed mapping, filling defaults; raises ConfigError with all problems."""
    errors: List[str] = []
    top = _Reader(errors, data, "")
    positive = lambda v: v > 0
    non_negative = lambda v: v >= 0

    version = top.get("schema_version", int, required=True)
    if version is not None and version != CONFIG_SCHEMA_VERSION:
        errors.append(f"schema_version: unsupported version {version}, expected {CONFIG_SCHEMA_VERSION}")
    kind = top.get("experiment", str, required=True,
                   check=lambda v: v in EXPERIMENT_KINDS, message=f"must be one of {list(EXPERIMENT_KINDS)}")

    # model
    m = _Reader(errors, top.get("model", dict, required=True, default={}), "model")
    model_kind = m.get("kind", str, required=True,
                       check=lambda v: v in MODEL_KINDS, message=f"must be one of {list(MODEL_KINDS)}")
    integrable = model_kind == "integrable_b1"
    M = m.get("M", int, required=True, check=lambda v: v >= 2, message="must be >= 2")
    if M is not None and model_kind == "mbl" and M % 2:
        errors.append(f"model.M: mbl model needs an even number of sites for half filling (got {M})")
    if M is not None and integrable and M > MAX_SPIN_SITES:
        errors.append(f"model.M: integrable_b1 supports at most {MAX_SPIN_SITES} sites (got {M})")
    model = ModelBlock(
        kind=model_kind or "",
        M=M or 0,
        W=m.get("W", float, DEFAULT_W, check=non_negative, message="must be >= 0"),
        W_grid=m.get_list("W_grid", float, check=non_negative, message="must be >= 0"),
        J=m.get("J", float, DEFAULT_J),
        U=m.get("U", float, DEFAULT_U),
        gamma=m.get("gamma", float, DEFAULT_GAMMA_B1 if integrable else DEFAULT_GAMMA,
                    check=positive, message="must be > 0"),
        eta=m.get("eta", int, DEFAULT_ETA_B1, check=lambda v: v in (1, -1), message="must be +1 or -1"),
        kappa=m.get("kappa", int, DEFAULT_KAPPA_B1, check=lambda v: v in (1, -1), message="must be +1 or -1"),
    )
    m.finish()
    if "W_grid" in m.data and not model.W_grid:
        errors.append("model.W_grid: must be a non-empty list")

    # trajectory
    t = _Reader(errors, top.get("trajectory", dict, default={}), "trajectory")
    trajectory = TrajectoryBlock(
        dt=t.get("dt", float, TRAJECTORY_DT, check=positive, message="must be > 0"),
        transient_time=t.get("transient_time", float, 0.0, check=non_negative, message="must be >= 0"),
        run_time=t.get("run_time", float, 10.0, check=non_negative, message="must be >= 0"),
        trace_stride=t.get("trace_stride", int, TRACE_STRIDE, check=positive, message="must be > 0"),
    )
    t.finish()

    # lyapunov
    ly = _Reader(errors, top.get("lyapunov", dict, default={}), "lyapunov")
    lyapunov = LyapunovBlock(
        delta0=ly.get("delta0", float, DELTA0, check=positive, message="must be > 0"),
        tau=ly.get("tau", float, TAU_INTEGRABLE if integrable else TAU_MBL, check=positive, message="must be > 0"),
        n_renorms=ly.get("n_renorms", int, N_RENORMS, check=positive, message="must be > 0"),
        transient_time=ly.get("transient_time", float, TRANSIENT_INTEGRABLE if integrable else TRANSIENT_MBL,
                              check=non_negative, message="must be >= 0"),
        bisect_tol=ly.get("bisect_tol", float, None, check=positive, message="must be > 0"),
        bisect_max_iter=ly.get("bisect_max_iter", int, BISECT_MAX_ITER, check=positive, message="must be > 0"),
        renorm_direction=ly.get("renorm_direction", str, "difference",
                                check=lambda v: v in ("difference", "random"), message="must be 'difference' or 'random'"),
        observable_kind=ly.get("observable_kind", str, "goe_random" if integrable else "model_hamiltonian",
                               check=lambda v: v in ("model_hamiltonian", "goe_random"),
                               message="must be 'model_hamiltonian' or 'goe_random'"),
        n_observables=ly.get("n_observables", int, 1, check=positive, message="must be > 0"),
    )
    ly.finish()
    if lyapunov.bisect_tol is not None and lyapunov.delta0 and not lyapunov.bisect_tol < lyapunov.delta0:
        errors.append(f"lyapunov.bisect_tol: must be below delta0={lyapunov.delta0} (got {lyapunov.bisect_tol})")
    if integrable and lyapunov.observable_kind == "model_hamiltonian" and kind in ("le_distribution", "le_sweep", "trajectory_trace"):
        errors.append("lyapunov.observable_kind: integrable_b1 has H = 0, use 'goe_random'")
    if trajectory.dt and lyapunov.tau and not lyapunov.tau > trajectory.dt:
        errors.append(f"lyapunov.tau: must exceed trajectory.dt={trajectory.dt} (got {lyapunov.tau})")
    for name, value in (("lyapunov.tau", lyapunov.tau), ("lyapunov.transient_time", lyapunov.transient_time),
                        ("trajectory.transient_time", trajectory.transient_time),
                        ("trajectory.run_time", trajectory.run_time)):
        if trajectory.dt and value is not None and not _is_multiple(value, trajectory.dt):
            errors.append(f"{name}: must be a multiple of trajectory.dt={trajectory.dt} (got {value})")

    # csr
    c = _Reader(errors, top.get("csr", dict, default={}), "csr")
    csr = CsrBlock(
        bins=c.get("bins", int, CSR_BINS, check=lambda v: v >= 2, message="must be >= 2"),
        marginal_bins=c.get("marginal_bins", int, CSR_MARGINAL_BINS, check=lambda v: v >= 2, message="must be >= 2"),
        stripe_halfwidth=c.get("stripe_halfwidth", float, CSR_STRIPE_HALFWIDTH, check=positive, message="must be > 0"),
        depletion_radius=c.get("depletion_radius", float, CSR_DEPLETION_RADIUS,
                               check=lambda v: 0 < v < 1, message="must be in (0, 1)"),
        drop_stationary=c.get("drop_stationary", bool, CSR_DROP_STATIONARY),
        reference_ensembles=c.get_list("reference_ensembles", str, check=lambda v: v in REFERENCE_ENSEMBLES,
                                       message=f"must be one of {list(REFERENCE_ENSEMBLES)}"),
        reference_n=c.get("reference_n", int, 500, check=lambda v: v >= 3, message="must be >= 3"),
        reference_runs=c.get("reference_runs", int, 20, check=positive, message="must be > 0"),
    )
    c.finish()
    if kind == "csr_experiment" and model_kind and M:
        dim = _hilbert_dim(model_kind, M)
        if dim * dim > SUPEROPERATOR_MAX_DIM:
            errors.append(f"model.M: superoperator dim {dim * dim} exceeds budget {SUPEROPERATOR_MAX_DIM}")

    # sampling
    s = _Reader(errors, top.get("sampling", dict, default={}), "sampling")
    sampling = SamplingBlock(
        n_disorder=s.get("n_disorder", int, 1, check=positive, message="must be > 0"),
        n_traj=s.get("n_traj", int, 1, check=positive, message="must be > 0"),
        master_seed=s.get("master_seed", int, DEFAULT_MASTER_SEED, check=non_negative, message="must be >= 0"),
    )
    s.finish()
    if kind == "unraveling_check" and sampling.n_traj < 4:
        errors.append(f"sampling.n_traj: unraveling_check needs at least 4 trajectories (got {sampling.n_traj})")

    # output
    o = _Reader(errors, top.get("output", dict, default={}), "output")
    output = OutputBlock(
        directory=o.get("directory", str, str(RESULTS_DIR)),
        formats=o.get_list("formats", str, ("csv", "json"), check=lambda v: v in OUTPUT_FORMATS,
                           message=f"must be one of {list(OUTPUT_FORMATS)}"),
    )
    o.finish()

    top.finish()
    if errors:
        raise ConfigError(errors)

    return ExperimentConfig(
        schema_version=version,
        experiment_kind=kind,
        model=model,
        trajectory=trajectory,
        lyapunov=lyapunov,
        csr=csr,
        sampling=sampling,
        output=output,
    )


def _is_multiple(value: float, dt: float) -> bool:
    n = round(value / dt)
    return abs(n * dt - value) <= 1e-9 * max(1.0, value)


def _hilbert_dim(model_kind: str, M: int) -> int:
    if model_kind == "integrable_b1":
        return 2 ** M
    from math import comb
    return comb(M, M // 2)
