"""
Complex spacing ratio statistics of non-Hermitian spectra.

For every eigenvalue the ratio z = (nn - lambda) / (nnn - lambda) of its
nearest and next-nearest neighbour offsets lies in the unit disc; its
distribution separates chaotic (Ginibre-like, depleted near z = 0 and
z = 1) from regular (flat disc) spectra.
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from numba import njit

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    CSR_BINS, CSR_MARGINAL_BINS, CSR_STRIPE_HALFWIDTH, CSR_DEGENERACY_FLOOR, CSR_DROP_STATIONARY
)
from core.errors import DegenerateSpectrumError, EmptySectionError, EigensolverError
from core.liouville import Spectrum
from core.seeding import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CsrSample:
    z: complex
    source_index: int
    nn_distance: float
    nnn_distance: float
    degenerate_flag: bool


class CsrSamples:
    """Columnar store of ratio samples; iterates as CsrSample records."""

    def __init__(self, z, source_index, nn_distance, nnn_distance, degenerate):
        self.z = np.asarray(z, dtype=np.complex128)
        self.source_index = np.asarray(source_index, dtype=np.int64)
        self.nn_distance = np.asarray(nn_distance, dtype=float)
        self.nnn_distance = np.asarray(nnn_distance, dtype=float)
        self.degenerate = np.asarray(degenerate, dtype=bool)
        sizes = {a.size for a in (self.z, self.source_index, self.nn_distance, self.nnn_distance, self.degenerate)}
        if len(sizes) != 1:
            raise ValueError(f"CsrSamples columns differ in length: {sorted(sizes)}")

    @classmethod
    def from_z(cls, z) -> "CsrSamples":
        """Synthetic samples (reference points), none degenerate."""
        z = np.asarray(z, dtype=np.complex128).reshape(-1)
        n = z.size
        return cls(z, np.arange(n), np.abs(z), np.ones(n), np.zeros(n, dtype=bool))

    @classmethod
    def merge(cls, parts: Sequence["CsrSamples"]) -> "CsrSamples":
        if not parts:
            return cls([], [], [], [], [])
        return cls(*(np.concatenate([getattr(p, name) for p in parts]) for name in cls._columns()))

    @staticmethod
    def _columns() -> Tuple[str, ...]:
        return ("z", "source_index", "nn_distance", "nnn_distance", "degenerate")

    def to_arrays(self) -> dict:
        return {name: getattr(self, name) for name in self._columns()}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "CsrSamples":
        return cls(*(arrays[name] for name in cls._columns()))

    @property
    def valid_z(self) -> np.ndarray:
        return self.z[~self.degenerate]

    @property
    def n_degenerate(self) -> int:
        return int(np.sum(self.degenerate))

    def __len__(self):
        return self.z.size

    def __iter__(self) -> Iterator[CsrSample]:
        for i in range(len(self)):
            yield CsrSample(
                z=complex(self.z[i]),
                source_index=int(self.source_index[i]),
                nn_distance=float(self.nn_distance[i]),
                nnn_distance=float(self.nnn_distance[i]),
                degenerate_flag=bool(self.degenerate[i]),
            )


SampleSource = Union[CsrSamples, Sequence[CsrSample], np.ndarray]


def _valid_z(samples: SampleSource) -> np.ndarray:
    if isinstance(samples, CsrSamples):
        return samples.valid_z
    if isinstance(samples, np.ndarray):
        return samples.astype(np.complex128).reshape(-1)
    return np.array([s.z for s in samples if not s.degenerate_flag], dtype=np.complex128)


# --- Neighbour search ---

@njit(cache=True)
def _neighbor_kernel(values):
    """Brute-force NN/NNN indices; ties go to the smaller index."""
    n = values.shape[0]
    nn = np.empty(n, dtype=np.int64)
    nnn = np.empty(n, dtype=np.int64)
    diameter = 0.0
    for k in range(n):
        best, second = np.inf, np.inf
        i_best, i_second = -1, -1
        for j in range(n):
            if j == k:
                continue
            d = abs(values[j] - values[k])
            if d > diameter:
                diameter = d
            if d < best:
                second, i_second = best, i_best
                best, i_best = d, j
            elif d < second:
                second, i_second = d, j
        nn[k] = i_best
        nnn[k] = i_second
    return nn, nnn, diameter


def _eigenvalues(spectrum: Union[Spectrum, np.ndarray]) -> np.ndarray:
    values = spectrum.eigenvalues if isinstance(spectrum, Spectrum) else spectrum
    values = np.ascontiguousarray(values, dtype=np.complex128).reshape(-1)
    if values.size < 3:
        raise ValueError(f"Need at least 3 eigenvalues, got {values.size}")
    return values


def neighbor_indices(spectrum: Union[Spectrum, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, float]:
    """(nn index, nnn index, spectral diameter) for every eigenvalue."""
    nn, nnn, diameter = _neighbor_kernel(_eigenvalues(spectrum))
    return nn, nnn, float(diameter)


def neighbor_triples(spectrum: Union[Spectrum, np.ndarray]) -> List[Tuple[complex, complex, complex]]:
    values = _eigenvalues(spectrum)
    nn, nnn, _ = neighbor_indices(values)
    return [(complex(values[k]), complex(values[nn[k]]), complex(values[nnn[k]])) for k in range(values.size)]


# --- Ratios ---

def csr_values(
    spectrum: Union[Spectrum, np.ndarray],
    degeneracy_floor: float = CSR_DEGENERACY_FLOOR,
    drop_stationary: bool = CSR_DROP_STATIONARY
) -> CsrSamples:
    """
    Ratio samples of one spectrum. A sample whose NNN distance is below
    degeneracy_floor * diameter is flagged degenerate and kept out of
    every statistic.
    """
    if drop_stationary and isinstance(spectrum, Spectrum):
        spectrum = spectrum.without_stationary()
    values = _eigenvalues(spectrum)
    nn, nnn, diameter = neighbor_indices(values)
    nn_offset = values[nn] - values
    nnn_offset = values[nnn] - values
    nn_distance = np.abs(nn_offset)
    nnn_distance = np.abs(nnn_offset)
    degenerate = nnn_distance < degeneracy_floor * diameter
    if diameter == 0:
        degenerate[:] = True
    z = np.full(values.size, np.nan, dtype=np.complex128)
    ok = ~degenerate
    z[ok] = nn_offset[ok] / nnn_offset[ok]
    samples = CsrSamples(z, np.arange(values.size), nn_distance, nnn_distance, degenerate)
    if samples.n_degenerate == len(samples):
        label = spectrum.source_label if isinstance(spectrum, Spectrum) else "spectrum"
        raise DegenerateSpectrumError(f"{label}: all {len(samples)} ratio samples are degenerate")
    if samples.n_degenerate:
        logger.info(f"{samples.n_degenerate} of {len(samples)} ratio samples degenerate")
    return samples


# --- Histograms and marginals ---

@dataclass(frozen=True)
class CsrHistogram:
    edges: np.ndarray           # B+1 edges shared by Re and Im axes
    counts: np.ndarray          # counts[i, j]: Re in bin i, Im in bin j
    total: int
    z: np.ndarray               # samples behind the counts

    @property
    def bins(self) -> int:
        return self.edges.size - 1

    @property
    def cell_area(self) -> float:
        return float((self.edges[1] - self.edges[0]) ** 2)

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.total * self.cell_area)

    def rows(self) -> Iterator[Tuple[float, float, float, float, float]]:
        """(re_left, re_right, im_left, im_right, density) per cell."""
        density = self.density
        for i in range(self.bins):
            for j in range(self.bins):
                yield (float(self.edges[i]), float(self.edges[i + 1]),
                       float(self.edges[j]), float(self.edges[j + 1]), float(density[i, j]))


@dataclass(frozen=True)
class Marginal:
    edges: np.ndarray
    density: np.ndarray

    def rows(self) -> Iterator[Tuple[float, float, float]]:
        for i in range(self.density.size):
            yield float(self.edges[i]), float(self.edges[i + 1]), float(self.density[i])

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


def csr_histogram(samples: SampleSource, bins: int = CSR_BINS) -> CsrHistogram:
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    z = _valid_z(samples)
    if z.size < 1:
        raise ValueError("csr_histogram needs at least one non-degenerate sample")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    re = np.clip(z.real, -1.0, 1.0)
    im = np.clip(z.imag, -1.0, 1.0)
    counts, _, _ = np.histogram2d(re, im, bins=[edges, edges])
    return CsrHistogram(edges=edges, counts=counts.astype(np.int64), total=int(z.size), z=z)


def _marginal_source(source) -> np.ndarray:
    z = source.z if isinstance(source, CsrHistogram) else _valid_z(source)
    if z.size < 1:
        raise ValueError("marginal of an empty sample")
    return z


def radial_marginal(source, bins: int = CSR_MARGINAL_BINS) -> Marginal:
    """Density of r = |z| on [0, 1], binned directly on the samples."""
    r = np.clip(np.abs(_marginal_source(source)), 0.0, 1.0)
    density, edges = np.histogram(r, bins=bins, range=(0.0, 1.0), density=True)
    return Marginal(edges=edges, density=density)


def angular_marginal(source, bins: int = CSR_MARGINAL_BINS) -> Marginal:
    """Density of theta = arg z on (-pi, pi]."""
    theta = np.angle(_marginal_source(source))
    density, edges = np.histogram(theta, bins=bins, range=(-np.pi, np.pi), density=True)
    return Marginal(edges=edges, density=density)


def real_axis_section(
    samples: SampleSource,
    halfwidth: float = CSR_STRIPE_HALFWIDTH,
    bins: int = CSR_MARGINAL_BINS
) -> Marginal:
    """Density of Re z among samples with |Im z| <= halfwidth."""
    if not halfwidth > 0:
        raise ValueError(f"halfwidth must be > 0, got {halfwidth}")
    z = _valid_z(samples)
    stripe = z[np.abs(z.imag) <= halfwidth]
    if stripe.size == 0:
        raise EmptySectionError(f"No samples within |Im z| <= {halfwidth}")
    density, edges = np.histogram(np.clip(stripe.real, -1.0, 1.0), bins=bins, range=(-1.0, 1.0), density=True)
    return Marginal(edges=edges, density=density)


# --- Scalar summaries ---

@dataclass(frozen=True)
class CsrSummary:
    n_samples: int
    n_degenerate: int
    mean_r: float
    mean_cos_theta: float

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_degenerate": self.n_degenerate,
            "mean_r": self.mean_r,
            "mean_cos_theta": self.mean_cos_theta,
        }


def summary_stats(samples: SampleSource) -> Tuple[float, float]:
    """(<|z|>, <cos arg z>) over non-degenerate samples."""
    z = _valid_z(samples)
    if z.size < 1:
        raise ValueError("summary_stats needs at least one non-degenerate sample")
    return float(np.mean(np.abs(z))), float(np.mean(np.cos(np.angle(z))))


def summarize(samples: CsrSamples) -> CsrSummary:
    mean_r, mean_cos = summary_stats(samples)
    return CsrSummary(
        n_samples=len(samples) - samples.n_degenerate,
        n_degenerate=samples.n_degenerate,
        mean_r=mean_r,
        mean_cos_theta=mean_cos,
    )


def uniform_disk_share(center: complex, radius: float) -> float:
    """Fraction of the unit disc's area inside the disc |z - center| < radius."""
    d = abs(center)
    r = radius
    if d + r <= 1.0:
        area = np.pi * r ** 2
    elif d >= 1.0 + r:
        area = 0.0
    elif d + 1.0 <= r:
        area = np.pi
    else:
        # lens of two intersecting circles with radii 1 and r
        a1 = np.arccos((d ** 2 + 1.0 - r ** 2) / (2.0 * d))
        a2 = np.arccos((d ** 2 + r ** 2 - 1.0) / (2.0 * d * r))
        kite = 0.5 * np.sqrt((-d + r + 1.0) * (d + r - 1.0) * (d - r + 1.0) * (d + r + 1.0))
        area = a1 + r ** 2 * a2 - kite
    return float(area / np.pi)


def disk_mass_ratio(samples: SampleSource, center: complex, radius: float) -> float:
    """Observed sample fraction in the disc over its uniform-disc share."""
    z = _valid_z(samples)
    if z.size < 1:
        raise ValueError("disk_mass_ratio needs samples")
    share = uniform_disk_share(center, radius)
    if share <= 0:
        raise ValueError(f"Disc at {center} with radius {radius} misses the unit disc")
    observed = float(np.mean(np.abs(z - center) < radius))
    return observed / share


# --- Reference ensembles ---

def sample_ginue(n: int, seed: int) -> Spectrum:
    """Eigenvalues of an n x n matrix with i.i.d. entries (x + iy) / sqrt(2n)."""
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    rng = stream(seed, n, purpose="ginue")
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0 * n)
    try:
        eigenvalues = scipy.linalg.eigvals(g)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(f"ginue(n={n})", str(e)) from e
    return Spectrum(eigenvalues, source_label=f"ginue(n={n},seed={seed})", hilbert_dim=n)


def sample_poisson_points(n: int, seed: int) -> Spectrum:
    """n i.i.d. points uniform on the unit square."""
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    rng = stream(seed, n, purpose="poisson_points")
    points = rng.random(n) + 1j * rng.random(n)
    return Spectrum(points, source_label=f"poisson(n={n},seed={seed})", hilbert_dim=n)


def uniform_disc_points(n: int, seed: int) -> np.ndarray:
    """n points uniform on the closed unit disc."""
    rng = stream(seed, n, purpose="uniform_disc")
    r = np.sqrt(rng.random(n))
    theta = rng.uniform(-np.pi, np.pi, n)
    return r * np.exp(1j * theta)


def pooled_samples(spectra: Sequence[Spectrum], **kwargs) -> CsrSamples:
    """Ratios computed per spectrum, then merged."""
    return CsrSamples.merge([csr_values(s, **kwargs) for s in spectra])
