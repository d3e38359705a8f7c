"""
Complex operator algebra shared by the models, the Lindbladian and the
trajectory engine: Kronecker products, matrix exponentials, expectation
values and density-matrix distances.
"""
import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    MAX_OPERATOR_DIM, DENSE_THRESHOLD, HERMITIAN_TOL,
    NORM_REL_TOL, NORM_UNDERFLOW, DENSITY_TOL, EXPECTATION_IMAG_TOL
)
from core.errors import (
    OperatorSizeError, NumericError, DegenerateStateError, DimensionMismatchError
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComplexOperator:
    """Square complex matrix; read-only once built."""
    entries: np.ndarray
    hermitian: Optional[bool] = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatchError(f"Operator must be square, got shape {entries.shape}")
        if entries.shape[0] < 1:
            raise DimensionMismatchError("Operator dimension must be positive")
        if self.hermitian:
            deviation = np.max(np.abs(entries - entries.conj().T))
            if deviation > HERMITIAN_TOL:
                raise NumericError(f"Operator flagged hermitian deviates by {deviation:.3e}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        if isinstance(other, ComplexOperator):
            return ComplexOperator(self.entries @ other.entries)
        return self.entries @ other


@dataclass(frozen=True)
class PureState:
    """State vector that carries its squared norm (may be < 1 between jumps)."""
    amplitudes: np.ndarray
    norm_sq: float = field(init=False)

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.size < 1:
            raise DimensionMismatchError("State must have at least one amplitude")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "norm_sq", float(np.vdot(amplitudes, amplitudes).real))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def normalized(self) -> "PureState":
        if self.norm_sq < NORM_UNDERFLOW:
            raise DegenerateStateError(f"Cannot normalize state with norm_sq={self.norm_sq:.3e}")
        return PureState(self.amplitudes / np.sqrt(self.norm_sq))


# --- Builders ---

def identity(dim: int) -> ComplexOperator:
    return ComplexOperator(np.eye(dim), hermitian=True)


def zeros(dim: int) -> ComplexOperator:
    return ComplexOperator(np.zeros((dim, dim)), hermitian=True)


def from_coo(
    dim: int,
    rows: Sequence[int],
    cols: Sequence[int],
    values: Sequence[complex],
    hermitian: Optional[bool] = None
) -> ComplexOperator:
    """
    Build an operator from a coordinate list. Duplicate (row, col) entries
    are summed; the result is converted to dense.
    """
    if dim > MAX_OPERATOR_DIM:
        raise OperatorSizeError(f"Operator dim {dim} exceeds limit {MAX_OPERATOR_DIM}")
    coo = scipy.sparse.coo_matrix(
        (np.asarray(values, dtype=np.complex128), (np.asarray(rows), np.asarray(cols))),
        shape=(dim, dim)
    )
    return ComplexOperator(coo.toarray(), hermitian=hermitian)


def dagger(a: ComplexOperator) -> ComplexOperator:
    return ComplexOperator(a.entries.conj().T, hermitian=a.hermitian)


def commutator(a: ComplexOperator, b: ComplexOperator) -> ComplexOperator:
    _check_same_dim(a.dim, b.dim)
    return ComplexOperator(a.entries @ b.entries - b.entries @ a.entries)


def projector(psi: PureState) -> np.ndarray:
    """|psi><psi| / <psi|psi>"""
    if psi.norm_sq < NORM_UNDERFLOW:
        raise DegenerateStateError(f"Projector of degenerate state (norm_sq={psi.norm_sq:.3e})")
    return np.outer(psi.amplitudes, psi.amplitudes.conj()) / psi.norm_sq


# --- Operations ---

def kron(a: ComplexOperator, b: ComplexOperator) -> ComplexOperator:
    """
    Kronecker product: entry (i*dim_b + k, j*dim_b + l) = a(i,j) * b(k,l).
    """
    dim = a.dim * b.dim
    if dim > MAX_OPERATOR_DIM:
        raise OperatorSizeError(
            f"kron of dims {a.dim} x {b.dim} = {dim} exceeds limit {MAX_OPERATOR_DIM}"
        )
    hermitian = True if (a.hermitian and b.hermitian) else None
    return ComplexOperator(np.kron(a.entries, b.entries), hermitian=hermitian)


def kron_chain(ops: Iterable[ComplexOperator]) -> ComplexOperator:
    return reduce(kron, ops)


def matexp(a: ComplexOperator, t: float) -> ComplexOperator:
    """
    exp(t * a) by scaling-and-squaring with a Pade approximant (dense only).
    """
    if a.dim > DENSE_THRESHOLD:
        raise OperatorSizeError(f"matexp limited to dim <= {DENSE_THRESHOLD}, got {a.dim}")
    scaled = t * a.entries
    if not np.all(np.isfinite(scaled)):
        raise NumericError("matexp input has non-finite entries")
    result = scipy.linalg.expm(scaled)
    if not np.all(np.isfinite(result)):
        raise NumericError(f"matexp overflowed for t={t}")
    return ComplexOperator(result)


def expectation(o: ComplexOperator, psi: PureState) -> float:
    """
    Normalized expectation <psi|O|psi> / <psi|psi>, so that the value does
    not depend on the decaying norm of an unraveled state.
    """
    _check_same_dim(o.dim, psi.dim)
    if o.hermitian is False:
        raise NumericError("expectation requires a Hermitian observable")
    if psi.norm_sq < NORM_UNDERFLOW:
        raise DegenerateStateError(f"Expectation on degenerate state (norm_sq={psi.norm_sq:.3e})")
    return expectation_value(o.entries, psi.amplitudes, psi.norm_sq)


def expectation_value(o: np.ndarray, amplitudes: np.ndarray, norm_sq: Optional[float] = None) -> float:
    """Array-level expectation used inside trajectory loops."""
    if norm_sq is None:
        norm_sq = float(np.vdot(amplitudes, amplitudes).real)
    if norm_sq < NORM_UNDERFLOW:
        raise DegenerateStateError(f"Expectation on degenerate state (norm_sq={norm_sq:.3e})")
    value = np.vdot(amplitudes, o @ amplitudes) / norm_sq
    if abs(value.imag) > EXPECTATION_IMAG_TOL * max(float(np.linalg.norm(o)), 1.0):
        raise NumericError(f"Expectation has imaginary part {value.imag:.3e}; observable is not Hermitian")
    return float(value.real)


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Half the sum of singular values of rho_a - rho_b."""
    rho_a = np.asarray(rho_a, dtype=np.complex128)
    rho_b = np.asarray(rho_b, dtype=np.complex128)
    if rho_a.shape != rho_b.shape or rho_a.ndim != 2 or rho_a.shape[0] != rho_a.shape[1]:
        raise DimensionMismatchError(
            f"trace_distance needs equal square shapes, got {rho_a.shape} and {rho_b.shape}"
        )
    return 0.5 * float(np.sum(scipy.linalg.svdvals(rho_a - rho_b)))


def density_problems(rho: np.ndarray, tol: float = DENSITY_TOL) -> list:
    """List every way rho fails to be a trace-one Hermitian PSD matrix."""
    problems = []
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return [f"not square: shape {rho.shape}"]
    trace = np.trace(rho)
    if abs(trace - 1.0) > tol:
        problems.append(f"trace {trace:.6g} != 1")
    hermitian_dev = np.max(np.abs(rho - rho.conj().T))
    if hermitian_dev > tol:
        problems.append(f"non-Hermitian by {hermitian_dev:.3e}")
    else:
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
        if min_eig < -tol:
            problems.append(f"negative eigenvalue {min_eig:.3e}")
    return problems


def _check_same_dim(a: int, b: int):
    if a != b:
        raise DimensionMismatchError(f"Dimension mismatch: {a} vs {b}")


def is_unit_norm(psi: PureState, tol: float = NORM_REL_TOL) -> bool:
    return abs(psi.norm_sq - 1.0) <= tol
