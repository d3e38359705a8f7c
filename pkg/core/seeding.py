"""
Hierarchical random streams.

Every job draws from a Philox generator keyed by
(master_seed, *path, purpose), so results never depend on scheduling order
and no two jobs share a stream.
"""
import hashlib
from typing import Tuple

import numpy as np


def purpose_hash(purpose: str) -> int:
    """Stable 32-bit integer for a purpose tag."""
    return int(hashlib.md5(purpose.encode()).hexdigest()[:8], 16)


def seed_words(master_seed: int, *path: int, purpose: str = "") -> Tuple[int, ...]:
    if master_seed < 0 or any(p < 0 for p in path):
        raise ValueError(f"Seeds must be non-negative, got {(master_seed, *path)}")
    return (int(master_seed), *(int(p) for p in path), purpose_hash(purpose))


def stream(master_seed: int, *path: int, purpose: str = "") -> np.random.Generator:
    """Independent generator for (master_seed, *path, purpose)."""
    seq = np.random.SeedSequence(list(seed_words(master_seed, *path, purpose=purpose)))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(master_seed: int, *path: int, purpose: str = "") -> int:
    """Derived 63-bit integer seed, for recording in manifests."""
    seq = np.random.SeedSequence(list(seed_words(master_seed, *path, purpose=purpose)))
    return int(seq.generate_state(1, np.uint64)[0] >> np.uint64(1))


def format_seed_path(path: Tuple[int, ...]) -> str:
    """'master/i/j' form written to per-cell CSVs."""
    return "/".join(str(int(p)) for p in path)


def parse_seed_path(text: str) -> Tuple[int, ...]:
    """Inverse of format_seed_path; the result is a valid rng argument of estimate_le."""
    try:
        path = tuple(int(p) for p in str(text).split("/"))
    except ValueError as e:
        raise ValueError(f"Malformed seed path {text!r}") from e
    seed_words(*path)
    return path
