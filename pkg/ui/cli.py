"""
CLI Interface for the Dissipative Chaos Toolbox
Subcommands: simulate, csr, spectrum, check, report.
"""
import sys
import logging
from pathlib import Path
from typing import List, Optional

# Add parent to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import DEFAULT_WORKERS, RESULTS_DIR, CSR_BINS, CSR_MARGINAL_BINS, CSR_STRIPE_HALFWIDTH
from core.errors import ConfigError, DQCError
from core.checks import run_checks, ginue_reference
from core.csr import (
    csr_values, csr_histogram, radial_marginal, angular_marginal, real_axis_section, summarize
)
from core.harness import run_experiment
from core.liouville import build_superoperator, spectrum, write_spectrum
from core.models import model_from_params
from core.report import emit_plot_data
from core.run_store import write_csv, write_json
from core.seeding import derive_seed
from parsers import load_config, parse_spectrum

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


class CLI:
    """Command handlers; each returns a process exit code."""

    def __init__(self, workers: int = DEFAULT_WORKERS, show_progress: bool = True):
        self.workers = workers
        self.show_progress = show_progress

    def simulate(self, config_path: Path, seed: Optional[int], out: Optional[Path], fresh: bool = False) -> int:
        cfg = load_config(config_path).with_overrides(master_seed=seed, out_dir=out)
        print(f"\n🧪 {cfg.experiment_kind} on {cfg.model.kind} (M={cfg.model.M})")
        print(f"   seed {cfg.sampling.master_seed} • {self.workers} worker(s) • {cfg.output.directory}")

        manifest = run_experiment(cfg, workers=self.workers, resume=not fresh, show_progress=self.show_progress)

        failed = manifest.failed_cells
        print(f"\n📁 {len(manifest.artifacts)} files written to {cfg.output.directory}")
        if failed:
            print(f"⚠️  {len(failed)} of {len(manifest.cells)} cells failed (see manifest.json)")
            return EXIT_FAILED
        print(f"✅ {len(manifest.cells)} cells complete in {manifest.wall_clock_s:.1f}s")
        return EXIT_OK

    def csr(self, spectrum_path: Path, out: Path, bins: int, marginal_bins: int, halfwidth: float) -> int:
        spec = parse_spectrum(spectrum_path)
        samples = csr_values(spec)
        stem = Path(spectrum_path).stem
        hist = csr_histogram(samples, bins=bins)
        write_csv(out / f"{stem}_hist.csv", ["re_left", "re_right", "im_left", "im_right", "density"], hist.rows())
        write_csv(out / f"{stem}_radial.csv", ["bin_left", "bin_right", "density"],
                  radial_marginal(hist, bins=marginal_bins).rows())
        write_csv(out / f"{stem}_angular.csv", ["bin_left", "bin_right", "density"],
                  angular_marginal(hist, bins=marginal_bins).rows())
        write_csv(out / f"{stem}_section.csv", ["bin_left", "bin_right", "density"],
                  real_axis_section(samples, halfwidth=halfwidth, bins=marginal_bins).rows())
        summary = summarize(samples).to_dict()
        write_json(out / f"{stem}_summary.json", summary)

        print(f"\n📊 {spec.source_label}: {summary['n_samples']} ratios ({summary['n_degenerate']} degenerate)")
        print(f"   <r> = {summary['mean_r']:.4f}   <cos theta> = {summary['mean_cos_theta']:.4f}")
        print(f"📁 Written to {out}")
        return EXIT_OK

    def spectrum(self, config_path: Path, seed: Optional[int], out: Path, disorder_index: int = 0) -> int:
        cfg = load_config(config_path).with_overrides(master_seed=seed)
        params = cfg.model.params()
        if cfg.model.kind == "mbl":
            params["disorder_seed"] = derive_seed(cfg.sampling.master_seed, disorder_index, purpose="disorder")
        model = model_from_params(**params)

        print(f"\n⏳ Diagonalizing {model.label} ({model.dim ** 2} x {model.dim ** 2})...")
        spec = spectrum(build_superoperator(model))
        csv_path = out / "spectrum.csv"
        write_spectrum(spec, csv_path, {"params": params, "master_seed": cfg.sampling.master_seed})

        problems = spec.check_lindblad_invariants()
        for problem in problems:
            print(f"⚠️  {problem}")
        print(f"✅ {len(spec)} eigenvalues written to {csv_path}")
        return EXIT_FAILED if problems else EXIT_OK

    def check(self, only: Optional[List[str]], reference: bool, out: Path) -> int:
        print("\n🔍 Running invariant and oracle checks")
        results = run_checks(only)
        for r in results:
            mark = "✅" if r.passed else "❌"
            print(f"  {mark} {r.name}: {r.detail}")

        if reference:
            print("\n⏳ Sampling GinUE reference constants (n=1000, 50 matrices)...")
            ref = ginue_reference()
            path = write_json(out / "ginue_reference.json", ref)
            print(f"  📌 <r> = {ref['mean_r']:.3f}   <cos theta> = {ref['mean_cos_theta']:.3f}   ({path})")

        failed = [r for r in results if not r.passed]
        if failed:
            print(f"\n❌ {len(failed)} of {len(results)} checks failed")
            return EXIT_FAILED
        print(f"\n✅ All {len(results)} checks passed")
        return EXIT_OK

    def report(self, run_dir: Path) -> int:
        result = emit_plot_data(run_dir)
        print(f"\n📈 Plot bundles in {run_dir / 'plots'}:")
        for name, files in result.bundles.items():
            print(f"  📦 {name}: {', '.join(files)}")
        for missing in result.missing:
            print(f"  ❌ missing: {missing}")
        return EXIT_FAILED if result.missing else EXIT_OK


def build_parser():
    import argparse

    parser = argparse.ArgumentParser(
        description="Dissipative Chaos Toolbox - Lyapunov exponents and spectral statistics of Lindbladians"
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose logging")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run an experiment config")
    simulate.add_argument("--config", "-c", type=Path, required=True, help="Experiment YAML")
    simulate.add_argument("--seed", type=int, help="Override sampling.master_seed")
    simulate.add_argument("--workers", "-w", type=int, default=DEFAULT_WORKERS, help="Worker processes")
    simulate.add_argument("--out", "-o", type=Path, help="Override output.directory")
    simulate.add_argument("--fresh", action="store_true", help="Ignore completed cells of a previous run")

    csr = sub.add_parser("csr", help="Spacing ratio statistics of an eigenvalue CSV")
    csr.add_argument("spectrum", type=Path, help="CSV with re,im columns")
    csr.add_argument("--out", "-o", type=Path, default=RESULTS_DIR, help="Output directory")
    csr.add_argument("--bins", type=int, default=CSR_BINS)
    csr.add_argument("--marginal-bins", type=int, default=CSR_MARGINAL_BINS)
    csr.add_argument("--halfwidth", type=float, default=CSR_STRIPE_HALFWIDTH, help="Real-axis stripe half width")

    spec = sub.add_parser("spectrum", help="Full Lindbladian spectrum of a config's model")
    spec.add_argument("--config", "-c", type=Path, required=True, help="Experiment YAML (model block used)")
    spec.add_argument("--seed", type=int, help="Override sampling.master_seed")
    spec.add_argument("--out", "-o", type=Path, default=RESULTS_DIR, help="Output directory")
    spec.add_argument("--disorder-index", type=int, default=0, help="Which disorder realization")

    check = sub.add_parser("check", help="Run the invariant and oracle suite")
    check.add_argument("--only", nargs="+", help="Run only the named checks")
    check.add_argument("--reference", action="store_true", help="Also record GinUE reference constants")
    check.add_argument("--out", "-o", type=Path, default=RESULTS_DIR, help="Output directory")

    report = sub.add_parser("report", help="Build plot-data bundles from a finished run")
    report.add_argument("--out", "-o", type=Path, required=True, help="Run directory holding manifest.json")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for CLI"""
    args = build_parser().parse_args(argv)

    # Setup logging
    level = logging.DEBUG if args.verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    cli = CLI(workers=getattr(args, "workers", DEFAULT_WORKERS))
    try:
        if args.command == "simulate":
            return cli.simulate(args.config, args.seed, args.out, fresh=args.fresh)
        if args.command == "csr":
            return cli.csr(args.spectrum, args.out, args.bins, args.marginal_bins, args.halfwidth)
        if args.command == "spectrum":
            return cli.spectrum(args.config, args.seed, args.out, args.disorder_index)
        if args.command == "check":
            return cli.check(args.only, args.reference, args.out)
        return cli.report(args.out)
    except ConfigError as e:
        print(f"❌ {e}")
        return EXIT_CONFIG
    except (DQCError, FileNotFoundError, ValueError) as e:
        print(f"❌ {e}")
        return EXIT_FAILED
    except KeyboardInterrupt:
        print("\n\n👋 Interrupted; rerun the same command to resume")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
