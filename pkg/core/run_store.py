"""Run manifest and per-cell persistence, with resume of interrupted runs."""
import csv
import json
import os
import time
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
from dataclasses import dataclass, field, asdict
import numpy as np

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import CODE_VERSION

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
CELLS_DIR = "cells"

RUNNING = "running"
COMPLETE = "complete"
PARTIAL = "partial"


@dataclass
class RunManifest:
    experiment: str
    config: Dict[str, Any]
    config_hash: str
    code_version: str = CODE_VERSION
    status: str = RUNNING
    derived_seeds: Dict[str, int] = field(default_factory=dict)
    cells: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    started_at: float = 0.0
    finished_at: Optional[float] = None
    wall_clock_s: Optional[float] = None

    @property
    def failed_cells(self) -> List[str]:
        return [k for k, cell in self.cells.items() if cell.get("status") == "failed"]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        return cls(**data)


def cell_id(key: Tuple) -> str:
    """JSON text of the cell key; keys round-trip through cell_key."""
    return json.dumps(list(key))


def cell_key(cid: str) -> Tuple:
    return tuple(json.loads(cid))


def _cell_text(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: List[str], rows) -> Path:
    """CSV with shortest round-trip floats, so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell_text(v) for v in row])
    return path


def write_json(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    return path


def load_manifest(out_dir: Path) -> RunManifest:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"No manifest in {out_dir}")
    return RunManifest.from_dict(json.loads(path.read_text()))


class RunStore:
    """
    Owns one output directory. The manifest is rewritten (atomically)
    before the run, after every finished cell and at the end, so a killed
    run always leaves the list of completed cells behind.
    """

    def __init__(self, out_dir: Path, experiment: str, config: Dict[str, Any], config_hash: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(experiment=experiment, config=config, config_hash=config_hash)
        self._t0 = time.time()

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / MANIFEST_NAME

    def begin(self, resume: bool = True) -> int:
        """
        Write the initial manifest. With resume, completed cells of a
        previous run with the same config hash are carried over.
        Returns the number of carried-over cells.
        """
        carried = 0
        if resume and self.manifest_path.exists():
            try:
                previous = load_manifest(self.out_dir)
            except (json.JSONDecodeError, TypeError) as e:
                logger.warning(f"Ignoring unreadable manifest in {self.out_dir}: {e}")
                previous = None
            if previous and previous.config_hash == self.manifest.config_hash:
                done = {k: v for k, v in previous.cells.items() if v.get("status") != "failed"}
                self.manifest.cells.update(done)
                carried = len(done)
                logger.info(f"Resuming run in {self.out_dir}: {carried} cells already complete")
            elif previous:
                logger.warning(f"Config changed since last run in {self.out_dir}; starting fresh")
        self.manifest.started_at = self._t0
        self.manifest.status = RUNNING
        self._save()
        return carried

    def completed(self) -> Dict[Tuple, Dict[str, Any]]:
        return {cell_key(k): v for k, v in self.manifest.cells.items() if v.get("status") != "failed"}

    def record_cell(self, key: Tuple, payload: Dict[str, Any], arrays: Optional[np.ndarray] = None):
        cid = cell_id(key)
        entry = dict(payload)
        if arrays is not None:
            path = self.cell_array_path(key)
            path.parent.mkdir(parents=True, exist_ok=True)
            np.save(path, arrays)
            entry["array"] = str(path.relative_to(self.out_dir))
        self.manifest.cells[cid] = entry
        self._save()

    def cell_array_path(self, key: Tuple) -> Path:
        name = "_".join(str(k) for k in key).replace("/", "-")
        return self.out_dir / CELLS_DIR / f"{name}.npy"

    def load_cell_array(self, key: Tuple) -> np.ndarray:
        entry = self.manifest.cells[cell_id(key)]
        return np.load(self.out_dir / entry["array"])

    def set_seed(self, name: str, seed: int):
        self.manifest.derived_seeds[name] = int(seed)

    def add_artifact(self, path: Path):
        rel = str(Path(path).relative_to(self.out_dir))
        if rel not in self.manifest.artifacts:
            self.manifest.artifacts.append(rel)

    def finalize(self) -> RunManifest:
        self.manifest.artifacts.sort()
        self.manifest.status = PARTIAL if self.manifest.failed_cells else COMPLETE
        self.manifest.finished_at = time.time()
        self.manifest.wall_clock_s = self.manifest.finished_at - self._t0
        self._save()
        logger.info(f"Run {self.manifest.status}: {len(self.manifest.cells)} cells, "
                    f"{len(self.manifest.artifacts)} artifacts")
        return self.manifest

    # --- Private methods ---

    def _save(self):
        tmp = self.manifest_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(asdict(self.manifest), indent=2, sort_keys=True))
        os.replace(tmp, self.manifest_path)
