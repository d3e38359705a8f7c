import numpy as np
import pytest

from core.checks import brute_force_neighbors
from core.csr import (
    CsrSample, CsrSamples, angular_marginal, csr_histogram, csr_values, disk_mass_ratio,
    neighbor_indices, neighbor_triples, pooled_samples, radial_marginal, real_axis_section,
    sample_ginue, sample_poisson_points, summarize, summary_stats, uniform_disc_points,
    uniform_disk_share
)
from core.errors import DegenerateSpectrumError, EmptySectionError


def test_three_point_ratios():
    samples = csr_values(np.array([0.0, 1.0, 3.0]))
    np.testing.assert_allclose(samples.z, [1 / 3, -0.5, 2 / 3])
    assert neighbor_triples(np.array([0.0, 1.0, 3.0]))[0] == (0j, 1 + 0j, 3 + 0j)
    np.testing.assert_allclose(samples.nn_distance, [1.0, 1.0, 2.0])
    np.testing.assert_allclose(samples.nnn_distance, [3.0, 2.0, 3.0])


def test_ties_go_to_smaller_index():
    nn, nnn, diameter = neighbor_indices(np.array([0.0, 1.0, -1.0, 5.0]))
    assert (nn[0], nnn[0]) == (1, 2)
    assert diameter == pytest.approx(6.0)


def test_exact_duplicate_is_nearest_neighbour():
    samples = csr_values(np.array([0.0, 0.0, 1.0, 3.0]))
    assert samples.nn_distance[0] == 0.0
    assert samples.z[0] == 0
    assert not samples.degenerate[0]


def test_kernel_matches_brute_force(rng):
    values = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    nn, nnn, _ = neighbor_indices(values)
    ref_nn, ref_nnn = brute_force_neighbors(values)
    np.testing.assert_array_equal(nn, ref_nn)
    np.testing.assert_array_equal(nnn, ref_nnn)


def test_ratios_are_affine_invariant(rng):
    values = rng.standard_normal(300) + 1j * rng.standard_normal(300)
    a, b = 2.5 * np.exp(0.7j), 3.0 - 4.0j
    np.testing.assert_allclose(csr_values(a * values + b).z, csr_values(values).z, atol=1e-9)


def test_ratios_lie_in_unit_disc(rng):
    z = csr_values(rng.standard_normal(2000) + 1j * rng.standard_normal(2000)).valid_z
    assert np.all(np.abs(z) <= 1.0 + 1e-15)


def test_fully_degenerate_spectrum():
    with pytest.raises(DegenerateSpectrumError):
        csr_values(np.ones(5, dtype=complex))


def test_too_few_eigenvalues():
    with pytest.raises(ValueError):
        csr_values(np.array([0.0, 1.0]))


def test_samples_container():
    a = CsrSamples.from_z(np.array([0.1 + 0.2j, -0.3j]))
    b = csr_values(np.array([0.0, 1.0, 3.0]))
    merged = CsrSamples.merge([a, b])
    assert len(merged) == 5
    assert merged.n_degenerate == 0
    assert all(isinstance(s, CsrSample) for s in merged)
    restored = CsrSamples.from_arrays(merged.to_arrays())
    np.testing.assert_array_equal(restored.valid_z, merged.valid_z)


def test_single_sample_histogram():
    hist = csr_histogram(np.array([0.3 + 0.4j]), bins=10)
    assert np.count_nonzero(hist.counts) == 1
    assert np.sum(hist.density * hist.cell_area) == pytest.approx(1.0)
    assert len(list(hist.rows())) == 100


def test_uniform_disc_marginals():
    z = uniform_disc_points(1_000_000, seed=3)
    radial = radial_marginal(z, bins=50)
    centers = 0.5 * (radial.edges[1:] + radial.edges[:-1])
    assert radial.mass == pytest.approx(1.0)
    assert np.max(np.abs(radial.density - 2 * centers)) <= 0.1
    angular = angular_marginal(z, bins=50)
    np.testing.assert_allclose(angular.density, 1 / (2 * np.pi), rtol=0.05)
    mean_r, mean_cos = summary_stats(z)
    assert mean_r == pytest.approx(2 / 3, abs=0.01)
    assert mean_cos == pytest.approx(0.0, abs=0.01)


def test_uniform_disc_real_axis_section():
    section = real_axis_section(uniform_disc_points(1_000_000, seed=4), halfwidth=0.05, bins=50)
    centers = 0.5 * (section.edges[1:] + section.edges[:-1])
    inner = section.density[np.abs(centers) <= 0.9]
    np.testing.assert_allclose(inner, np.mean(inner), rtol=0.1)


def test_empty_section():
    with pytest.raises(EmptySectionError):
        real_axis_section(np.array([0.5 + 0.5j]), halfwidth=0.05)


def test_summary_of_three_points():
    summary = summarize(csr_values(np.array([0.0, 1.0, 3.0])))
    assert summary.n_samples == 3 and summary.n_degenerate == 0
    assert summary.mean_r == pytest.approx((1 / 3 + 1 / 2 + 2 / 3) / 3)
    assert summary.mean_cos_theta == pytest.approx(1 / 3)


def test_uniform_disk_share():
    assert uniform_disk_share(0j, 0.25) == pytest.approx(0.0625)
    assert uniform_disk_share(3 + 0j, 0.5) == 0.0
    z = uniform_disc_points(400_000, seed=5)
    observed = np.mean(np.abs(z - 1.0) < 0.25)
    assert uniform_disk_share(1 + 0j, 0.25) == pytest.approx(observed, abs=0.002)
    assert disk_mass_ratio(z, 0j, 0.25) == pytest.approx(1.0, abs=0.02)


def test_reference_samplers_are_seeded():
    np.testing.assert_array_equal(sample_ginue(50, 1).eigenvalues, sample_ginue(50, 1).eigenvalues)
    points = sample_poisson_points(100, 2).eigenvalues
    assert np.all((points.real >= 0) & (points.real < 1) & (points.imag >= 0) & (points.imag < 1))


@pytest.mark.slow
def test_poisson_points_fill_the_disc_uniformly():
    samples = pooled_samples([sample_poisson_points(500, seed) for seed in range(200)])
    mean_r, mean_cos = summary_stats(samples)
    assert mean_r == pytest.approx(2 / 3, abs=0.01)
    assert mean_cos == pytest.approx(0.0, abs=0.01)


@pytest.mark.slow
def test_ginue_reference_shape():
    n = 500
    spectra = [sample_ginue(n, seed) for seed in range(20)]
    for spec in spectra:
        assert np.max(np.abs(spec.eigenvalues)) <= 1 + 5 / np.sqrt(n)
    samples = pooled_samples(spectra)
    assert disk_mass_ratio(samples, 0j, 0.25) < 0.5
    angular = angular_marginal(samples, bins=50)
    centers = 0.5 * (angular.edges[1:] + angular.edges[:-1])
    near_zero = angular.density[np.abs(centers) < 0.2]
    assert np.all(near_zero < 1 / (2 * np.pi))
