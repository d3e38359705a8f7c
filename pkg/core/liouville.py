"""
Vectorized Lindbladian: superoperator construction (column stacking),
direct master-equation propagation and the full complex spectrum.
"""
import json
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import scipy.linalg

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    SUPEROPERATOR_MAX_DIM, SPECTRUM_MAX_DIM, SPECTRUM_TOL,
    SPECTRUM_RESIDUAL_SAMPLES, DENSITY_TOL, PSD_DRIFT_TOL, DENSITY_DT
)
from core.errors import (
    MemoryBudgetError, EigensolverError, NumericalInstabilityError, DimensionMismatchError
)
from core.linalg import ComplexOperator, matexp, density_problems
from core.models import LindbladModel
from core.seeding import stream

logger = logging.getLogger(__name__)

COLUMN_STACKING = "column"


@dataclass(frozen=True)
class Superoperator:
    hilbert_dim: int
    matrix: ComplexOperator
    label: str = ""
    vectorization: str = COLUMN_STACKING

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix.entries @ vec(rho), self.hilbert_dim)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    source_label: str
    hilbert_dim: int

    def __post_init__(self):
        eigenvalues = np.array(self.eigenvalues, dtype=np.complex128).reshape(-1)
        eigenvalues.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    def __len__(self):
        return self.eigenvalues.size

    def check_lindblad_invariants(self, tol: float = SPECTRUM_TOL) -> list:
        """Problems with the stationary-state and dissipativity invariants."""
        scale = max(1.0, float(np.max(np.abs(self.eigenvalues))))
        problems = []
        if np.min(np.abs(self.eigenvalues)) > tol * scale:
            problems.append("no eigenvalue at zero (stationary state missing)")
        max_re = float(np.max(self.eigenvalues.real))
        if max_re > tol * scale:
            problems.append(f"eigenvalue with positive real part {max_re:.3e}")
        return problems

    def without_stationary(self) -> "Spectrum":
        """Drop the single eigenvalue closest to zero."""
        keep = np.ones(len(self), dtype=bool)
        keep[np.argmin(np.abs(self.eigenvalues))] = False
        return Spectrum(self.eigenvalues[keep], self.source_label, self.hilbert_dim)


# --- Vectorization ---

def vec(rho: np.ndarray) -> np.ndarray:
    """Column stacking: vec(A rho B) = (B^T kron A) vec(rho)."""
    return np.asarray(rho, dtype=np.complex128).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


# --- Operations ---

def build_superoperator(model: LindbladModel) -> Superoperator:
    n = model.dim
    if n * n > SUPEROPERATOR_MAX_DIM:
        raise MemoryBudgetError(
            f"{model.label}: superoperator dim {n * n} exceeds budget {SUPEROPERATOR_MAX_DIM}"
        )
    eye = np.eye(n, dtype=np.complex128)
    h = model.hamiltonian.entries
    matrix = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op, rate in model.jumps:
        l = op.entries
        ldl = l.conj().T @ l
        matrix += rate * (
            np.kron(l.conj(), l)
            - 0.5 * np.kron(eye, ldl)
            - 0.5 * np.kron(ldl.T, eye)
        )
    logger.info(f"Built superoperator for {model.label}: {n * n}x{n * n}")
    return Superoperator(hilbert_dim=n, matrix=ComplexOperator(matrix), label=model.label)


def apply_lindbladian(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Direct commutator/anticommutator form of the Lindbladian."""
    h = model.hamiltonian.entries
    out = -1j * (h @ rho - rho @ h)
    for op, rate in model.jumps:
        l = op.entries
        ldl = l.conj().T @ l
        out += rate * (l @ rho @ l.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def spectrum(superop: Superoperator, residual_samples: int = SPECTRUM_RESIDUAL_SAMPLES) -> Spectrum:
    """
    All N^2 eigenvalues (unordered). A handful of eigenpairs is checked for
    residual ||L v - lambda v|| <= tol * ||L||.
    """
    matrix = superop.matrix.entries
    if superop.matrix.dim > SPECTRUM_MAX_DIM:
        raise MemoryBudgetError(
            f"{superop.label}: dense eigensolver limited to dim {SPECTRUM_MAX_DIM}, got {superop.matrix.dim}"
        )
    try:
        if residual_samples > 0:
            eigenvalues, vectors = scipy.linalg.eig(matrix, right=True)
        else:
            eigenvalues, vectors = scipy.linalg.eigvals(matrix), None
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(superop.label, str(e)) from e

    if not np.all(np.isfinite(eigenvalues)):
        raise EigensolverError(superop.label, "non-finite eigenvalues")

    if vectors is not None:
        scale = np.linalg.norm(matrix, 2) if matrix.shape[0] <= 1024 else np.linalg.norm(matrix)
        rng = stream(0, matrix.shape[0], purpose="residual_sample")
        picks = rng.choice(eigenvalues.size, size=min(residual_samples, eigenvalues.size), replace=False)
        for k in picks:
            v = vectors[:, k]
            residual = np.linalg.norm(matrix @ v - eigenvalues[k] * v) / np.linalg.norm(v)
            if residual > SPECTRUM_TOL * max(scale, 1.0):
                raise EigensolverError(superop.label, f"residual {residual:.3e} for eigenvalue {k}")

    result = Spectrum(eigenvalues, source_label=superop.label, hilbert_dim=superop.hilbert_dim)
    for problem in result.check_lindblad_invariants():
        logger.warning(f"{superop.label}: {problem}")
    logger.info(f"Diagonalized {superop.label}: {eigenvalues.size} eigenvalues")
    return result


def evolve_density(
    model: LindbladModel,
    rho0: np.ndarray,
    t_final: float,
    dt: float = DENSITY_DT,
    superop: Optional[Superoperator] = None
) -> np.ndarray:
    """
    rho(t_final) by repeated application of the propagator exp(L dt); a
    final shorter step covers any remainder of t_final / dt.
    """
    rho0 = np.asarray(rho0, dtype=np.complex128)
    if rho0.shape != (model.dim, model.dim):
        raise DimensionMismatchError(f"rho0 shape {rho0.shape} does not match model dim {model.dim}")
    problems = density_problems(rho0, DENSITY_TOL)
    if problems:
        raise ValueError(f"rho0 is not a density matrix: {'; '.join(problems)}")
    if t_final == 0:
        return rho0.copy()
    if t_final < 0 or dt <= 0:
        raise ValueError(f"Need t_final >= 0 and dt > 0, got t_final={t_final}, dt={dt}")

    superop = superop or build_superoperator(model)
    n_steps = int(np.floor(t_final / dt + 1e-9))
    remainder = t_final - n_steps * dt

    v = vec(rho0)
    if n_steps:
        step = matexp(superop.matrix, dt).entries
        for _ in range(n_steps):
            v = step @ v
    if remainder > 1e-12:
        v = matexp(superop.matrix, remainder).entries @ v

    rho = unvec(v, model.dim)
    trace_drift = abs(np.trace(rho) - 1.0)
    if trace_drift > DENSITY_TOL:
        raise NumericalInstabilityError(f"{model.label}: trace drifted by {trace_drift:.3e}")
    hermitian_drift = float(np.max(np.abs(rho - rho.conj().T)))
    if hermitian_drift > DENSITY_TOL:
        raise NumericalInstabilityError(f"{model.label}: Hermiticity drifted by {hermitian_drift:.3e}")
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if min_eig < -PSD_DRIFT_TOL:
        raise NumericalInstabilityError(
            f"{model.label}: density matrix lost positivity (min eigenvalue {min_eig:.3e})"
        )
    return rho


# --- Persistence ---

def write_spectrum(spec: Spectrum, csv_path: Path, metadata: Optional[Dict] = None) -> Path:
    """Eigenvalue CSV (re,im) plus a JSON sidecar next to it."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["re", "im"])
        for z in spec.eigenvalues:
            writer.writerow([repr(float(z.real)), repr(float(z.imag))])
    sidecar = {"label": spec.source_label, "hilbert_dim": spec.hilbert_dim, "n_eigenvalues": len(spec)}
    sidecar.update(metadata or {})
    sidecar_path = csv_path.with_suffix(".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    logger.info(f"Saved spectrum: {csv_path}")
    return sidecar_path
