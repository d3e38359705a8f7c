#!/usr/bin/env python3
"""
Setup script for the Dissipative Chaos Toolbox
Installs dependencies, compiles the numba kernels and runs the quick checks.
"""
import sys
import subprocess
from pathlib import Path

BASE_DIR = Path(__file__).parent
RESULTS_DIR = BASE_DIR / "results"
QUICK_CHECKS = ["csr_unit_disc", "neighbor_brute_force", "trace_preservation", "superoperator_oracle"]


def print_header(msg):
    print(f"\n{'='*60}")
    print(f"  {msg}")
    print('='*60)


def print_step(msg):
    print(f"\n→ {msg}")


def check_python_version():
    print_step("Checking Python version...")
    if sys.version_info < (3, 9):
        print("❌ Python 3.9+ required")
        sys.exit(1)
    print(f"  ✅ Python {sys.version_info.major}.{sys.version_info.minor}")


def create_directories():
    print_step("Creating directories...")
    RESULTS_DIR.mkdir(parents=True, exist_ok=True)
    print(f"  📁 {RESULTS_DIR.relative_to(BASE_DIR)}")


def install_dependencies():
    print_step("Installing Python dependencies...")
    subprocess.run([
        sys.executable, "-m", "pip", "install", "-r",
        str(BASE_DIR / "requirements.txt"), "-q"
    ], check=True)
    print("  ✅ Dependencies installed")


def warm_kernels():
    print_step("Compiling neighbour-search kernel...")
    try:
        sys.path.insert(0, str(BASE_DIR))
        from core.csr import csr_values, uniform_disc_points
        csr_values(uniform_disc_points(64, seed=0))
        print("  ✅ Kernel compiled and cached")
        return True
    except Exception as e:
        print(f"  ❌ Kernel compilation failed: {e}")
        return False


def run_quick_checks():
    print_step("Running quick checks...")
    from core.checks import run_checks
    results = run_checks(QUICK_CHECKS)
    for r in results:
        print(f"  {'✅' if r.passed else '❌'} {r.name}")
    return all(r.passed for r in results)


def show_usage():
    print_header("Setup Complete!")
    print("""
Quick Start:
-----------
1. Check trajectories against the master equation:
   python main.py simulate --config presets/unraveling_check.yaml

2. Lyapunov exponent vs disorder:
   python main.py simulate --config presets/le_sweep_smoke.yaml --workers 4

3. Spacing ratios of a Lindbladian spectrum:
   python main.py simulate --config presets/csr_mbl.yaml

Full check suite:
-----------------
  python main.py check

For more info:
  python main.py --help
""")


def main():
    print_header("Dissipative Chaos Toolbox - Setup")

    check_python_version()
    create_directories()
    install_dependencies()

    kernels_ok = warm_kernels()
    checks_ok = run_quick_checks() if kernels_ok else False

    print("\n" + "="*60)
    print("  Summary")
    print("="*60)
    print(f"  Python deps:  ✅")
    print(f"  Numba kernel: {'✅' if kernels_ok else '❌'}")
    print(f"  Checks:       {'✅' if checks_ok else '❌'}")

    if not checks_ok:
        print("\n⚠️  Some checks failed. Run for details:")
        print("     python main.py check -v")

    show_usage()


if __name__ == "__main__":
    main()
