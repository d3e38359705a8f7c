"""
Plot-data bundles from a finished run.

Each bundle is a directory of CSV files plus a descriptor JSON naming the
axes and labels, enough for any generic plotting tool.
"""
import csv
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from core.run_store import RunManifest, load_manifest, write_csv, write_json

logger = logging.getLogger(__name__)

PLOTS_DIR = "plots"


@dataclass
class ReportResult:
    bundles: Dict[str, List[str]] = field(default_factory=dict)
    missing: List[str] = field(default_factory=list)


class _Bundle:
    def __init__(self, out_dir: Path, name: str, result: ReportResult):
        self.out_dir = out_dir
        self.dir = out_dir / PLOTS_DIR / name
        self.name = name
        self.result = result
        self.files: List[str] = []
        self.series: List[Dict] = []

    def copy(self, artifact: str, available: List[str], **series) -> bool:
        if artifact not in available or not (self.out_dir / artifact).exists():
            self.result.missing.append(artifact)
            logger.warning(f"{self.name}: missing artifact {artifact}")
            return False
        self.dir.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(self.out_dir / artifact, self.dir / artifact)
        self.files.append(artifact)
        if series:
            self.series.append(dict(series, file=artifact))
        return True

    def add(self, path: Path, **series):
        self.files.append(path.name)
        if series:
            self.series.append(dict(series, file=path.name))

    def finish(self, title: str, axes: Dict[str, str]):
        if not self.files:
            return
        write_json(self.dir / "descriptor.json", {
            "figure": self.name, "title": title, "axes": axes,
            "files": sorted(self.files), "series": self.series,
        })
        self.result.bundles[self.name] = sorted(self.files)


def emit_plot_data(out_dir: Path) -> ReportResult:
    """Build bundles for the experiment recorded in out_dir/manifest.json."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    if manifest.status == "running":
        logger.warning(f"Run in {out_dir} did not finish; bundles may be incomplete")
    result = ReportResult()
    builders = {
        "le_distribution": _lambda_distribution,
        "trajectory_trace": _trace,
        "le_sweep": _sweep,
        "csr_experiment": _csr,
        "unraveling_check": _oracle,
    }
    builders[manifest.experiment](out_dir, manifest, result)
    logger.info(f"Emitted {len(result.bundles)} bundles, {len(result.missing)} missing artifacts")
    return result


def _lambda_distribution(out_dir: Path, manifest: RunManifest, result: ReportResult):
    bundle = _Bundle(out_dir, "lambda_distribution", result)
    bundle.copy("lambda_histogram.csv", manifest.artifacts, kind="histogram", x="bin", y="density")
    bundle.copy("lambda_fit.json", manifest.artifacts, kind="normal_fit")
    bundle.finish("Distribution of Lyapunov exponents", {"x": "lambda", "y": "probability density"})


def _trace(out_dir: Path, manifest: RunManifest, result: ReportResult):
    bundle = _Bundle(out_dir, "trajectory_pair", result)
    bundle.copy("trace.csv", manifest.artifacts, kind="line", x="t", y=["o_base", "o_perturbed"])
    bundle.copy("trajectory_trace.csv", manifest.artifacts, kind="line", x="t", y=["norm_sq", "o_t"])
    bundle.copy("jumps.csv", manifest.artifacts, kind="events", x="time")
    bundle.copy("growth.csv", manifest.artifacts, kind="scatter", x="t_k", y="log_dk")
    bundle.finish("Observable along base and perturbed trajectories", {"x": "t", "y": "<O>(t)"})


def _sweep(out_dir: Path, manifest: RunManifest, result: ReportResult):
    bundle = _Bundle(out_dir, "lambda_vs_disorder", result)
    source = out_dir / "le_sweep.csv"
    if "le_sweep.csv" not in manifest.artifacts or not source.exists():
        result.missing.append("le_sweep.csv")
        return
    with open(source, newline="") as f:
        rows = [(r["W"], r["mean_lambda"], r["stderr"]) for r in csv.DictReader(f)]
    M = manifest.config["model"]["M"]
    path = write_csv(bundle.dir / f"lambda_vs_W_M{M}.csv", ["W", "mean_lambda", "stderr"], rows)
    bundle.add(path, kind="errorbar", x="W", y="mean_lambda", err="stderr", label=f"M={M}")
    bundle.finish("Mean Lyapunov exponent versus disorder strength", {"x": "W", "y": "lambda"})


def _csr_prefixes(manifest: RunManifest) -> List[Tuple[str, str]]:
    prefixes = []
    for artifact in manifest.artifacts:
        if artifact.endswith("_summary.json"):
            prefix = artifact[: -len("_summary.json")]
            label = prefix.replace("csr_", "").replace("ref_", "reference ")
            prefixes.append((prefix, label))
    return prefixes


def _csr(out_dir: Path, manifest: RunManifest, result: ReportResult):
    sections = _Bundle(out_dir, "real_axis_sections", result)
    densities = _Bundle(out_dir, "csr_density", result)
    for prefix, label in _csr_prefixes(manifest):
        if f"{prefix}_section.csv" in manifest.artifacts:
            sections.copy(f"{prefix}_section.csv", manifest.artifacts, kind="line", x="Re z", label=label)
        if f"{prefix}_hist.csv" not in manifest.artifacts:
            continue
        densities.copy(f"{prefix}_hist.csv", manifest.artifacts, kind="heatmap", label=label)
        densities.copy(f"{prefix}_radial.csv", manifest.artifacts, kind="line", x="r", label=label)
        densities.copy(f"{prefix}_angular.csv", manifest.artifacts, kind="line", x="theta", label=label)
        densities.copy(f"{prefix}_summary.json", manifest.artifacts, kind="summary", label=label)
    sections.finish("Ratio density along the real axis", {"x": "Re z", "y": "density"})
    densities.finish("Complex spacing ratio density", {"x": "Re z", "y": "Im z"})


def _oracle(out_dir: Path, manifest: RunManifest, result: ReportResult):
    bundle = _Bundle(out_dir, "unraveling_oracle", result)
    bundle.copy("unraveling_check.json", manifest.artifacts, kind="scalar")
    bundle.finish("Trajectory ensemble versus master equation", {"x": "n_traj", "y": "trace distance"})
