#!/usr/bin/env python3
"""
Dissipative Chaos Toolbox - chaos diagnostics for open quantum systems

Largest Lyapunov exponents from unraveled quantum trajectories and complex
spacing ratio statistics of Lindbladian spectra.

Usage:
    python main.py simulate --config presets/unraveling_check.yaml
    python main.py simulate --config presets/le_sweep_smoke.yaml --workers 4
    python main.py spectrum --config presets/csr_mbl.yaml --out results/spec
    python main.py csr results/spec/spectrum.csv --out results/spec
    python main.py check
    python main.py report --out results/le_sweep_smoke
"""
import sys

from ui.cli import main

if __name__ == "__main__":
    sys.exit(main())
