"""
Lindblad model builders: the integrable pair-jump spin chain and the
disordered fermion chain with synchronizing pair dissipators, their bases,
disorder realizations, initial states and random observables.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    MAX_SPIN_SITES, DEFAULT_J, DEFAULT_U, DEFAULT_GAMMA, HERMITIAN_TOL
)
from core.errors import BasisError, ModelParameterError, DimensionMismatchError
from core.linalg import ComplexOperator, PureState, identity, kron_chain, from_coo
from core.seeding import seed_words, stream

logger = logging.getLogger(__name__)

SPIN_CHAIN = "spin_chain"
HALF_FILLING = "half_filling_fermions"

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)   # |0><1|
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


@dataclass(frozen=True)
class BasisDescriptor:
    """
    Product basis of M two-level sites. Site 1 is the most significant bit
    of a pattern, so sorted integers are the lexicographic order of the
    occupation strings and match Kronecker ordering.
    """
    kind: str
    sites: int
    dim: int
    occupation_table: Tuple[int, ...] = ()
    _index: Dict[int, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == SPIN_CHAIN:
            if self.dim != 2 ** self.sites:
                raise BasisError(f"spin_chain dim must be 2^{self.sites}, got {self.dim}")
        elif self.kind == HALF_FILLING:
            if len(self.occupation_table) != self.dim:
                raise BasisError("occupation_table length must equal dim")
            half = self.sites // 2
            if any(bin(p).count("1") != half for p in self.occupation_table):
                raise BasisError(f"every pattern must have {half} occupied sites")
            object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.occupation_table)})
        else:
            raise BasisError(f"Unknown basis kind: {self.kind}")

    def pattern(self, index: int) -> int:
        if not 0 <= index < self.dim:
            raise BasisError(f"Index {index} outside basis of dim {self.dim}")
        if self.kind == SPIN_CHAIN:
            return index
        return self.occupation_table[index]

    def index(self, pattern: int) -> int:
        if self.kind == SPIN_CHAIN:
            if not 0 <= pattern < self.dim:
                raise BasisError(f"Pattern {pattern} outside {self.sites}-site chain")
            return pattern
        try:
            return self._index[pattern]
        except KeyError:
            raise BasisError(
                f"Pattern {format(pattern, f'0{self.sites}b')} not in half-filling basis"
            ) from None

    def label(self, index: int) -> str:
        return format(self.pattern(index), f"0{self.sites}b")


@dataclass(frozen=True)
class DisorderRealization:
    values: Tuple[float, ...]
    seed: int

    def __post_init__(self):
        if any(not -1.0 <= h <= 1.0 for h in self.values):
            raise ModelParameterError("Disorder values must lie in [-1, 1]")


@dataclass(frozen=True)
class LindbladModel:
    hamiltonian: ComplexOperator
    jumps: Tuple[Tuple[ComplexOperator, float], ...]
    basis: BasisDescriptor
    label: str
    params: Dict[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        h = self.hamiltonian.entries
        if np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL:
            raise ModelParameterError(f"{self.label}: Hamiltonian is not Hermitian")
        dims = {self.hamiltonian.dim, self.basis.dim}
        dims.update(op.dim for op, _ in self.jumps)
        if len(dims) != 1:
            raise DimensionMismatchError(f"{self.label}: operators disagree on dim {sorted(dims)}")
        for k, (_, rate) in enumerate(self.jumps):
            if not rate > 0:
                raise ModelParameterError(f"{self.label}: rate of jump {k} must be > 0, got {rate}")
        object.__setattr__(self, "jumps", tuple(self.jumps))

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def jump_operators(self) -> List[ComplexOperator]:
        return [op for op, _ in self.jumps]

    @property
    def rates(self) -> np.ndarray:
        return np.array([rate for _, rate in self.jumps], dtype=float)


# --- Bases ---

def spin_chain_basis(M: int) -> BasisDescriptor:
    return BasisDescriptor(kind=SPIN_CHAIN, sites=M, dim=2 ** M)


def half_filling_basis(M: int) -> BasisDescriptor:
    if M < 2 or M % 2:
        raise ModelParameterError(f"Half filling needs an even number of sites >= 2, got M={M}")
    patterns = sorted(
        sum(1 << (M - 1 - site) for site in occupied)
        for occupied in combinations(range(M), M // 2)
    )
    return BasisDescriptor(kind=HALF_FILLING, sites=M, dim=len(patterns), occupation_table=tuple(patterns))


def _occupied(pattern: int, site: int, M: int) -> bool:
    return bool(pattern >> (M - 1 - site) & 1)


def _count_before(pattern: int, site: int, M: int) -> int:
    """Number of occupied sites with index < site (Jordan-Wigner string)."""
    if site == 0:
        return 0
    mask = ((1 << site) - 1) << (M - site)
    return bin(pattern & mask).count("1")


def _cdag_c(pattern: int, i: int, j: int, M: int) -> Optional[Tuple[int, int]]:
    """
    Apply c_i^dag c_j to a basis pattern with c_l = (prod_{k<l} Z_k) sigma^-_l.
    Returns (sign, new_pattern) or None when the result vanishes.
    """
    if not _occupied(pattern, j, M):
        return None
    if i == j:
        return 1, pattern
    sign = -1 if _count_before(pattern, j, M) % 2 else 1
    removed = pattern & ~(1 << (M - 1 - j))
    if _occupied(removed, i, M):
        return None
    if _count_before(removed, i, M) % 2:
        sign = -sign
    return sign, removed | (1 << (M - 1 - i))


# --- Integrable chain ---

def pair_jump_matrix(eta: int, kappa: int) -> np.ndarray:
    """4x4 pair operator in the ordered basis {|00>, |01>, |10>, |11>}."""
    return np.array([
        [eta, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, kappa],
    ], dtype=np.complex128)


def embed_pair(op4: np.ndarray, left_site: int, M: int) -> ComplexOperator:
    """Embed a two-site operator acting on (left_site, left_site + 1)."""
    parts = []
    if left_site > 0:
        parts.append(identity(2 ** left_site))
    parts.append(ComplexOperator(op4))
    if M - left_site - 2 > 0:
        parts.append(identity(2 ** (M - left_site - 2)))
    return kron_chain(parts)


def build_integrable_chain(M: int, eta: int = 1, kappa: int = -1, gamma: float = 1.0) -> LindbladModel:
    if eta not in (1, -1) or kappa not in (1, -1):
        raise ModelParameterError(f"eta and kappa must be +1 or -1, got eta={eta}, kappa={kappa}")
    if not 2 <= M <= MAX_SPIN_SITES:
        raise ModelParameterError(f"Integrable chain needs 2 <= M <= {MAX_SPIN_SITES}, got {M}")
    if not gamma > 0:
        raise ModelParameterError(f"gamma must be > 0, got {gamma}")

    basis = spin_chain_basis(M)
    op4 = pair_jump_matrix(eta, kappa)
    jumps = tuple((embed_pair(op4, l, M), float(gamma)) for l in range(M - 1))
    label = f"integrable_b1(M={M},eta={eta},kappa={kappa},gamma={gamma:g})"
    logger.info(f"Built {label}, dim {basis.dim}")
    return LindbladModel(
        hamiltonian=ComplexOperator(np.zeros((basis.dim, basis.dim)), hermitian=True),
        jumps=jumps,
        basis=basis,
        label=label,
        params={"kind": "integrable_b1", "M": M, "eta": eta, "kappa": kappa, "gamma": gamma},
    )


# --- Disordered fermion chain ---

def sample_disorder(M: int, seed: int) -> DisorderRealization:
    """
    M uniform values on [-1, 1]. Site l reads Philox block l under a key
    derived from seed, so each value depends only on (seed, l).
    """
    key = np.random.SeedSequence(list(seed_words(seed, purpose="disorder"))).generate_state(2, np.uint64)
    values = tuple(
        float(np.random.Generator(np.random.Philox(key=key, counter=site)).uniform(-1.0, 1.0))
        for site in range(M)
    )
    return DisorderRealization(values=values, seed=seed)


def build_mbl_chain(
    M: int,
    W: float,
    J: float = DEFAULT_J,
    U: float = DEFAULT_U,
    gamma: float = DEFAULT_GAMMA,
    disorder: Optional[DisorderRealization] = None
) -> LindbladModel:
    """
    Spinless fermions at half filling with random on-site potential,
    nearest-neighbour hopping and interaction, and pair dissipators
    L_l = (c_l^dag + c_{l+1}^dag)(c_l - c_{l+1}) at rate gamma.
    """
    if M < 2 or M % 2:
        raise ModelParameterError(f"MBL chain needs an even M >= 2, got M={M}")
    if W < 0:
        raise ModelParameterError(f"W must be >= 0, got {W}")
    if not gamma > 0:
        raise ModelParameterError(f"gamma must be > 0, got {gamma}")
    if disorder is None:
        raise ModelParameterError("A disorder realization is required")
    if len(disorder.values) != M:
        raise ModelParameterError(f"Disorder has {len(disorder.values)} values, expected {M}")

    basis = half_filling_basis(M)
    h = disorder.values

    rows, cols, vals = [], [], []
    for col, pattern in enumerate(basis.occupation_table):
        occ = [_occupied(pattern, l, M) for l in range(M)]
        diagonal = W * sum(h[l] for l in range(M) if occ[l])
        diagonal += U * sum(1 for l in range(M - 1) if occ[l] and occ[l + 1])
        rows.append(col)
        cols.append(col)
        vals.append(diagonal)
        for l in range(M - 1):
            for i, j in ((l, l + 1), (l + 1, l)):
                hop = _cdag_c(pattern, i, j, M)
                if hop is not None:
                    sign, target = hop
                    rows.append(basis.index(target))
                    cols.append(col)
                    vals.append(-J * sign)
    hamiltonian = from_coo(basis.dim, rows, cols, vals, hermitian=True)

    jumps = tuple((_pair_dissipator(basis, l), float(gamma)) for l in range(M - 1))
    label = f"mbl(M={M},W={W:g},J={J:g},U={U:g},gamma={gamma:g},seed={disorder.seed})"
    logger.info(f"Built {label}, dim {basis.dim}")
    return LindbladModel(
        hamiltonian=hamiltonian,
        jumps=jumps,
        basis=basis,
        label=label,
        params={"kind": "mbl", "M": M, "W": W, "J": J, "U": U, "gamma": gamma,
                "disorder_seed": disorder.seed},
    )


def _pair_dissipator(basis: BasisDescriptor, l: int) -> ComplexOperator:
    """(c_l^dag + c_{l+1}^dag)(c_l - c_{l+1}) expanded into four bilinears."""
    M = basis.sites
    terms = ((l, l, 1.0), (l, l + 1, -1.0), (l + 1, l, 1.0), (l + 1, l + 1, -1.0))
    rows, cols, vals = [], [], []
    for col, pattern in enumerate(basis.occupation_table):
        for i, j, coeff in terms:
            result = _cdag_c(pattern, i, j, M)
            if result is not None:
                sign, target = result
                rows.append(basis.index(target))
                cols.append(col)
                vals.append(coeff * sign)
    return from_coo(basis.dim, rows, cols, vals)


def jordan_wigner_annihilators(M: int) -> List[ComplexOperator]:
    """Full Fock-space c_l = Z x ... x Z x sigma^- x I x ... x I."""
    ops = []
    for l in range(M):
        parts = [ComplexOperator(SIGMA_Z)] * l + [ComplexOperator(SIGMA_MINUS)]
        parts += [identity(2)] * (M - l - 1)
        ops.append(kron_chain(parts))
    return ops


# --- States and observables ---

def neel_pattern(M: int) -> int:
    """Alternating occupation 1010...  starting with site 1 occupied."""
    return sum(1 << (M - 1 - site) for site in range(0, M, 2))


def neel_state(basis: BasisDescriptor) -> PureState:
    index = basis.index(neel_pattern(basis.sites))
    amplitudes = np.zeros(basis.dim, dtype=np.complex128)
    amplitudes[index] = 1.0
    return PureState(amplitudes)


def sample_goe_observable(dim: int, seed: int) -> ComplexOperator:
    """(G + G^T) / 2 with i.i.d. standard normal G."""
    g = stream(seed, purpose="goe_observable").standard_normal((dim, dim))
    return ComplexOperator((g + g.T) / 2.0, hermitian=True)


# --- Factories and transformations ---

def model_from_params(
    kind: str,
    M: int,
    W: float = 0.0,
    J: float = DEFAULT_J,
    U: float = DEFAULT_U,
    gamma: float = DEFAULT_GAMMA,
    eta: int = 1,
    kappa: int = -1,
    disorder_seed: int = 0
) -> LindbladModel:
    if kind == "integrable_b1":
        return build_integrable_chain(M, eta=eta, kappa=kappa, gamma=gamma)
    if kind == "mbl":
        return build_mbl_chain(M, W, J=J, U=U, gamma=gamma, disorder=sample_disorder(M, disorder_seed))
    raise ModelParameterError(f"Unknown model kind: {kind}")


def reflection_permutation(basis: BasisDescriptor) -> np.ndarray:
    """perm[i] = index of the site-reversed pattern of basis state i."""
    M = basis.sites
    reverse = lambda p: int(format(p, f"0{M}b")[::-1], 2)
    return np.array([basis.index(reverse(basis.pattern(i))) for i in range(basis.dim)])


def reflect_sites(model: LindbladModel) -> LindbladModel:
    """Relabel sites l -> M+1-l (basis permutation applied to every operator)."""
    perm = reflection_permutation(model.basis)
    p = np.zeros((model.dim, model.dim))
    p[perm, np.arange(model.dim)] = 1.0
    conj = lambda op: ComplexOperator(p @ op.entries @ p.T, hermitian=op.hermitian)
    return LindbladModel(
        hamiltonian=conj(model.hamiltonian),
        jumps=tuple((conj(op), rate) for op, rate in model.jumps),
        basis=model.basis,
        label=f"reflected[{model.label}]",
        params=dict(model.params),
    )
