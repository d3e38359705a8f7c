"""
Experiment Runner - dispatches a validated config to its pipeline
Handles seeding, parallel cells, quarantine of failed cells and output files.
"""
import logging
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import CODE_VERSION
from core.errors import DegenerateSpectrumError, EmptySectionError
from core.csr import (
    CsrSamples, csr_values, csr_histogram, radial_marginal, angular_marginal,
    real_axis_section, summarize, disk_mass_ratio, sample_ginue, sample_poisson_points
)
from core.linalg import projector, trace_distance
from core.liouville import build_superoperator, spectrum, evolve_density
from core.lyapunov import (
    LyapunovConfig, LeCell, estimate_le, run_le_cells, le_distribution_tasks, le_sweep_tasks,
    aggregate_sweep, gaussian_fit, histogram_density, resolve_observable, GOE_RANDOM, MODEL_HAMILTONIAN
)
from core.models import model_from_params, neel_state
from core.parallel import map_cells
from core.run_store import RunStore, RunManifest, write_csv, write_json
from core.seeding import derive_seed, format_seed_path
from core.unravel import TrajectoryConfig, ensemble_average, run_ensemble
from parsers.config_parser import ExperimentConfig

logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = ("re", "im", "nn_distance", "nnn_distance", "degenerate", "source_index")


# --- CSR cells ---

@dataclass(frozen=True)
class CsrTask:
    key: Tuple
    model_params: Dict
    drop_stationary: bool = False
    reference: str = ""         # "", "ginue" or "poisson"
    reference_n: int = 0
    seed: int = 0


@dataclass
class CsrCell:
    key: Tuple
    status: str
    samples: Optional[CsrSamples] = None
    n_eigenvalues: int = 0
    max_abs_imag: float = float("nan")
    error: str = ""

    def payload(self) -> Dict:
        return {"status": self.status, "n_eigenvalues": self.n_eigenvalues,
                "max_abs_imag": self.max_abs_imag, "error": self.error}


def samples_to_matrix(samples: CsrSamples) -> np.ndarray:
    return np.column_stack([
        samples.z.real, samples.z.imag, samples.nn_distance, samples.nnn_distance,
        samples.degenerate.astype(float), samples.source_index.astype(float),
    ])


def samples_from_matrix(matrix: np.ndarray) -> CsrSamples:
    matrix = np.asarray(matrix, dtype=float).reshape(-1, len(SAMPLE_COLUMNS))
    return CsrSamples(
        matrix[:, 0] + 1j * matrix[:, 1], matrix[:, 5].astype(np.int64),
        matrix[:, 2], matrix[:, 3], matrix[:, 4] > 0.5,
    )


def run_csr_cell(task: CsrTask) -> CsrCell:
    """One spectrum -> ratio samples. A fully degenerate spectrum is reported, not failed."""
    try:
        if task.reference == "ginue":
            spec = sample_ginue(task.reference_n, task.seed)
        elif task.reference == "poisson":
            spec = sample_poisson_points(task.reference_n, task.seed)
        else:
            model = model_from_params(**task.model_params)
            spec = spectrum(build_superoperator(model))
        max_imag = float(np.max(np.abs(spec.eigenvalues.imag)))
        try:
            samples = csr_values(spec, drop_stationary=task.drop_stationary)
        except DegenerateSpectrumError as e:
            logger.info(f"Cell {task.key}: {e}")
            return CsrCell(task.key, "degenerate", n_eigenvalues=len(spec), max_abs_imag=max_imag, error=str(e))
        return CsrCell(task.key, "ok", samples=samples, n_eigenvalues=len(spec), max_abs_imag=max_imag)
    except Exception as e:
        logger.warning(f"Cell {task.key} failed: {e}")
        return CsrCell(task.key, "failed", error=f"{type(e).__name__}: {e}")


# --- Runner ---

class ExperimentRunner:
    """
    Runs one experiment config into its output directory:
    1. Manifest written up front (resume picks up completed cells)
    2. Cells run in a worker pool, each recorded as it finishes
    3. Aggregates and per-figure CSV/JSON files written, manifest finalized
    """

    def __init__(self, cfg: ExperimentConfig, workers: int = 1, resume: bool = True, show_progress: bool = False):
        self.cfg = cfg
        self.workers = workers
        self.resume = resume
        self.show_progress = show_progress
        self.out_dir = Path(cfg.output.directory)
        self.master_seed = cfg.sampling.master_seed
        self.store = RunStore(self.out_dir, cfg.experiment_kind, cfg.to_dict(), cfg.config_hash())

    def run_experiment(self) -> RunManifest:
        pipelines = {
            "le_distribution": self._run_le_distribution,
            "le_sweep": self._run_le_sweep,
            "csr_experiment": self._run_csr_experiment,
            "trajectory_trace": self._run_trajectory_trace,
            "unraveling_check": self._run_unraveling_check,
        }
        self.store.begin(resume=self.resume)
        self.store.set_seed("master_seed", self.master_seed)
        logger.info(f"Running {self.cfg.experiment_kind} into {self.out_dir} (code {CODE_VERSION})")
        pipelines[self.cfg.experiment_kind]()
        return self.store.finalize()

    # --- Configs ---

    def _trajectory_config(self) -> TrajectoryConfig:
        t = self.cfg.trajectory
        return TrajectoryConfig(dt=t.dt, transient_time=t.transient_time, run_time=t.run_time,
                                seed=self.master_seed)

    def _lyapunov_config(self) -> LyapunovConfig:
        ly = self.cfg.lyapunov
        return LyapunovConfig(
            delta0=ly.delta0, tau=ly.tau, n_renorms=ly.n_renorms, transient_time=ly.transient_time,
            bisect_tol=ly.bisect_tol, bisect_max_iter=ly.bisect_max_iter,
            renorm_direction=ly.renorm_direction, observable_kind=ly.observable_kind,
        )

    def _disorder_seed(self, d: int) -> int:
        seed = derive_seed(self.master_seed, d, purpose="disorder")
        self.store.set_seed(f"disorder/{d}", seed)
        return seed

    def _write(self, name: str, header: List[str], rows) -> Path:
        path = write_csv(self.out_dir / name, header, rows)
        self.store.add_artifact(path)
        return path

    def _write_json(self, name: str, data: Dict) -> Path:
        path = write_json(self.out_dir / name, data)
        self.store.add_artifact(path)
        return path

    # --- Lyapunov pipelines ---

    def _run_cells(self, tasks, desc: str) -> List[LeCell]:
        completed = {
            key: LeCell(key=key, status=v["status"], exponent=v["exponent"], error=v.get("error", ""),
                        n_jumps=v.get("n_jumps", 0), params=v.get("params", {}))
            for key, v in self.store.completed().items()
        }
        record = lambda cell: self.store.record_cell(cell.key, {
            "status": cell.status, "exponent": cell.exponent, "error": cell.error,
            "n_jumps": cell.n_jumps, "params": cell.params,
        })
        return run_le_cells(tasks, workers=self.workers, completed=completed, on_cell=record,
                            desc=desc, show_progress=self.show_progress)

    def _run_le_distribution(self):
        model_params = self.cfg.model.params()
        if self.cfg.model.kind == "mbl":
            model_params["disorder_seed"] = self._disorder_seed(0)
        tasks = le_distribution_tasks(model_params, self.cfg.lyapunov.n_observables, self.cfg.sampling.n_traj,
                                      self._trajectory_config(), self._lyapunov_config(), self.master_seed)
        cells = self._run_cells(tasks, "le_distribution")

        self._write("lambda_cells.csv", ["observable_index", "pair_index", "lambda"],
                    ((c.key[0], c.key[1], c.exponent) for c in cells if c.ok))
        values = [c.exponent for c in cells if c.ok]
        if len(values) >= 2:
            edges, density = histogram_density(values)
            self._write("lambda_histogram.csv", ["bin_left", "bin_right", "density"],
                        zip(edges[:-1], edges[1:], density))
            self._write_json("lambda_fit.json", gaussian_fit(values))
        else:
            logger.warning(f"Only {len(values)} successful cells; no histogram written")

    def _run_le_sweep(self):
        model_params = self.cfg.model.params()
        for d in range(self.cfg.sampling.n_disorder):
            self._disorder_seed(d)
        tasks = le_sweep_tasks(model_params, self.cfg.W_values, self.cfg.sampling.n_disorder,
                               self.cfg.sampling.n_traj, self._trajectory_config(), self._lyapunov_config(),
                               self.master_seed)
        cells = self._run_cells(tasks, "le_sweep")
        rows = aggregate_sweep(cells)

        self._write("le_sweep.csv", ["W", "mean_lambda", "stderr", "n_cells"],
                    ((r.W, r.mean_lambda, r.stderr, r.n_cells) for r in rows))
        self._write("le_cells.csv", ["W", "disorder_seed", "pair_seed", "lambda"], (
            (c.key[0], t.model_params["disorder_seed"], format_seed_path(t.seed_path), c.exponent)
            for c, t in zip(cells, tasks) if c.ok
        ))
        for r in rows:
            print(f"  W={r.W:g}: lambda = {r.mean_lambda:.5g} +/- {r.stderr:.2g} ({r.n_cells} cells)")

    def _run_trajectory_trace(self):
        model_params = self.cfg.model.params()
        if self.cfg.model.kind == "mbl":
            model_params["disorder_seed"] = self._disorder_seed(0)
        model = model_from_params(**model_params)
        lcfg = self._lyapunov_config()
        observable = ((GOE_RANDOM, derive_seed(self.master_seed, 0, purpose="observable"))
                      if lcfg.observable_kind == GOE_RANDOM else (MODEL_HAMILTONIAN,))
        o = resolve_observable(model, observable)
        estimate = estimate_le(model, o, self._trajectory_config(), lcfg, rng=(self.master_seed, 0, 0),
                               trace_stride=self.cfg.trajectory.trace_stride)

        self._write("trace.csv", ["t", "o_base", "o_perturbed", "distance", "base_jump", "perturbed_jump"],
                    (astuple_row(r) for r in estimate.distance_trace))
        self._write("trajectory_trace.csv", ["t", "norm_sq", "o_t", "jump_flag"],
                    (astuple_row(r) for r in estimate.base_trace))
        jump_rows = [("base", j.time, j.operator_index) for j in estimate.base_jumps]
        jump_rows += [("perturbed", j.time, j.operator_index) for j in estimate.perturbed_jumps]
        self._write("jumps.csv", ["trajectory", "time", "operator_index"], jump_rows)
        self._write("growth.csv", ["k", "t_k", "delta_tk", "d_k", "log_dk"],
                    (astuple_row(r) for r in estimate.records))
        self._write_json("trace_summary.json", {
            "model_label": estimate.model_label,
            "lambda": estimate.exponent,
            "n_base_jumps": len(estimate.base_jumps),
            "n_perturbed_jumps": len(estimate.perturbed_jumps),
            "matched_jump_fraction": matched_jump_fraction(estimate.base_jumps, estimate.perturbed_jumps,
                                                           self.cfg.trajectory.dt),
            "direction_redraws": estimate.direction_redraws,
        })
        self.store.record_cell(("trace",), {"status": "ok", "exponent": estimate.exponent})

    # --- Density-matrix oracle ---

    def _run_unraveling_check(self):
        model_params = self.cfg.model.params()
        if self.cfg.model.kind == "mbl":
            model_params["disorder_seed"] = self._disorder_seed(0)
        model = model_from_params(**model_params)
        psi0 = neel_state(model.basis)
        t_final = self.cfg.trajectory.run_time
        n = self.cfg.sampling.n_traj

        rho_exact = evolve_density(model, projector(psi0), t_final)
        snapshots = run_ensemble(model, psi0, t_final, n, self.master_seed, dt=self.cfg.trajectory.dt,
                                 workers=self.workers)
        quarter = n // 4
        distance = trace_distance(ensemble_average(snapshots), rho_exact)
        distance_quarter = trace_distance(ensemble_average(snapshots[:quarter]), rho_exact)
        result = {
            "model_label": model.label,
            "t_final": t_final,
            "n_traj": n,
            "trace_distance": distance,
            "n_quarter": quarter,
            "trace_distance_quarter": distance_quarter,
            "error_ratio": distance_quarter / distance if distance > 0 else float("inf"),
        }
        self._write_json("unraveling_check.json", result)
        self.store.record_cell(("ensemble",), {"status": "ok", "trace_distance": distance})
        print(f"  trace distance at n={n}: {distance:.4g} (n={quarter}: {distance_quarter:.4g})")

    # --- CSR pipeline ---

    def _run_csr_experiment(self):
        csr = self.cfg.csr
        tasks = []
        for W in self.cfg.W_values:
            for d in range(self.cfg.sampling.n_disorder):
                params = dict(self.cfg.model.params(W=W), disorder_seed=self._disorder_seed(d))
                tasks.append(CsrTask(key=(float(W), d), model_params=params, drop_stationary=csr.drop_stationary))
        for name in csr.reference_ensembles:
            for r in range(csr.reference_runs):
                seed = derive_seed(self.master_seed, r, purpose=name)
                self.store.set_seed(f"{name}/{r}", seed)
                tasks.append(CsrTask(key=(name, r), model_params={}, reference=name,
                                     reference_n=csr.reference_n, seed=seed))

        cells = self._csr_cells(tasks)

        groups: Dict = {}
        for cell in cells:
            groups.setdefault(cell.key[0], []).append(cell)
        for group, members in groups.items():
            prefix = f"ref_{group}" if isinstance(group, str) else f"csr_W{group:g}"
            self._write_csr_group(prefix, members)

    def _csr_cells(self, tasks: List[CsrTask]) -> List[CsrCell]:
        completed = self.store.completed()
        cells: Dict[Tuple, CsrCell] = {}
        for task in tasks:
            entry = completed.get(task.key)
            if entry is None:
                continue
            samples = samples_from_matrix(self.store.load_cell_array(task.key)) if "array" in entry else None
            cells[task.key] = CsrCell(task.key, entry["status"], samples=samples,
                                      n_eigenvalues=entry.get("n_eigenvalues", 0),
                                      max_abs_imag=entry.get("max_abs_imag", float("nan")),
                                      error=entry.get("error", ""))
        pending = [t for t in tasks if t.key not in cells]

        def record(i, cell: CsrCell):
            arrays = samples_to_matrix(cell.samples) if cell.samples is not None else None
            self.store.record_cell(cell.key, cell.payload(), arrays=arrays)

        fresh = map_cells(run_csr_cell, pending, workers=self.workers, desc="spectra",
                          on_result=record, show_progress=self.show_progress)
        cells.update((c.key, c) for c in fresh)
        return [cells[t.key] for t in tasks]

    def _write_csr_group(self, prefix: str, members: List[CsrCell]):
        csr = self.cfg.csr
        summary = {
            "n_realizations": len(members),
            "n_failed": sum(c.status == "failed" for c in members),
            "n_degenerate_spectra": sum(c.status == "degenerate" for c in members),
            "max_abs_imag": max((c.max_abs_imag for c in members if c.status != "failed"), default=float("nan")),
        }
        parts = [c.samples for c in members if c.samples is not None]
        if not parts:
            summary.update({"n_samples": 0, "n_degenerate": 0, "mean_r": None, "mean_cos_theta": None})
            self._write_json(f"{prefix}_summary.json", summary)
            logger.warning(f"{prefix}: no usable ratio samples")
            return

        samples = CsrSamples.merge(parts)
        summary.update(summarize(samples).to_dict())
        radius = csr.depletion_radius
        summary["depletion_ratio_z0"] = disk_mass_ratio(samples, 0.0, radius)
        summary["depletion_ratio_z1"] = disk_mass_ratio(samples, 1.0, radius)
        summary["depletion_radius"] = radius

        hist = csr_histogram(samples, bins=csr.bins)
        self._write(f"{prefix}_hist.csv", ["re_left", "re_right", "im_left", "im_right", "density"], hist.rows())
        self._write(f"{prefix}_radial.csv", ["bin_left", "bin_right", "density"],
                    radial_marginal(hist, bins=csr.marginal_bins).rows())
        self._write(f"{prefix}_angular.csv", ["bin_left", "bin_right", "density"],
                    angular_marginal(hist, bins=csr.marginal_bins).rows())
        try:
            section = real_axis_section(samples, halfwidth=csr.stripe_halfwidth, bins=csr.marginal_bins)
            self._write(f"{prefix}_section.csv", ["bin_left", "bin_right", "density"], section.rows())
        except EmptySectionError as e:
            logger.warning(f"{prefix}: {e}")
            summary["section_empty"] = True
        if "npy" in self.cfg.output.formats:
            path = self.out_dir / f"{prefix}_z.npy"
            np.save(path, samples.valid_z)
            self.store.add_artifact(path)
        self._write_json(f"{prefix}_summary.json", summary)
        print(f"  {prefix}: {summary['n_samples']} ratios, <r>={summary['mean_r']:.4f}, "
              f"<cos theta>={summary['mean_cos_theta']:.4f}")


def astuple_row(record) -> Tuple:
    return tuple(asdict(record).values())


def matched_jump_fraction(base, perturbed, dt: float) -> float:
    """Share of base jumps matched by a perturbed jump at the same step and operator."""
    if not base:
        return 1.0 if not perturbed else 0.0
    step = lambda j: (int(round(j.time / dt)), j.operator_index)
    other = {step(j) for j in perturbed}
    return sum(step(j) in other for j in base) / max(len(base), len(perturbed))


def run_experiment(cfg: ExperimentConfig, workers: int = 1, resume: bool = True,
                   show_progress: bool = False) -> RunManifest:
    return ExperimentRunner(cfg, workers=workers, resume=resume, show_progress=show_progress).run_experiment()
