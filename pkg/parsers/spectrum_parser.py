"""
Spectrum Parser - eigenvalue CSV files written by the spectrum command
"""
from pathlib import Path
import csv
import json
import logging

import numpy as np

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from core.liouville import Spectrum

logger = logging.getLogger(__name__)


def parse_spectrum(file_path: Path) -> Spectrum:
    """
    Read a `re,im` eigenvalue CSV. Label and Hilbert dimension come from the
    JSON sidecar when one sits next to the file.
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Spectrum file not found: {file_path}")

    values = []
    with open(file_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["re", "im"]:
            raise ValueError(f"{file_path.name}: expected header 're,im', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values.append(complex(float(row[0]), float(row[1])))
            except (ValueError, IndexError) as e:
                raise ValueError(f"{file_path.name}, line {line_no}: bad eigenvalue row {row}") from e

    label, hilbert_dim = file_path.stem, int(round(np.sqrt(len(values))))
    sidecar = file_path.with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        label = meta.get("label", label)
        hilbert_dim = meta.get("hilbert_dim", hilbert_dim)

    logger.info(f"Loaded {len(values)} eigenvalues from {file_path.name}")
    return Spectrum(np.array(values, dtype=np.complex128), source_label=label, hilbert_dim=hilbert_dim)
