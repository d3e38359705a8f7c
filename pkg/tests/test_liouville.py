import numpy as np
import pytest
import scipy.linalg

from conftest import decaying_qubit, random_density
from core.errors import DimensionMismatchError, MemoryBudgetError, NumericalInstabilityError
from core.linalg import ComplexOperator
from core.liouville import (
    Superoperator, apply_lindbladian, build_superoperator, evolve_density, spectrum, unvec, vec, write_spectrum
)
from core.models import build_integrable_chain, reflect_sites
from core.unravel import effective_hamiltonian
from parsers import parse_spectrum


def test_column_stacking_identity(rng):
    a, b, rho = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(3))
    np.testing.assert_allclose(vec(a @ rho @ b), np.kron(b.T, a) @ vec(rho), atol=1e-12)
    np.testing.assert_array_equal(unvec(vec(rho), 3), rho)


@pytest.mark.parametrize("fixture", ["mbl4", "integrable3"])
def test_superoperator_matches_direct_form(fixture, request, rng):
    model = request.getfixturevalue(fixture)
    superop = build_superoperator(model)
    rho = random_density(model.dim, rng)
    np.testing.assert_allclose(superop.apply(rho), apply_lindbladian(model, rho), atol=1e-12)


def test_superoperator_preserves_trace(mbl4):
    matrix = build_superoperator(mbl4).matrix.entries
    # tr(L rho) = vec(I)^dag L vec(rho), so vec(I)^dag L must vanish
    np.testing.assert_allclose(vec(np.eye(mbl4.dim)).conj() @ matrix, 0, atol=1e-12)


def test_superoperator_budget():
    with pytest.raises(MemoryBudgetError):
        build_superoperator(build_integrable_chain(7))


def test_spectrum_invariants(mbl4):
    spec = spectrum(build_superoperator(mbl4))
    assert len(spec) == mbl4.dim ** 2
    assert spec.check_lindblad_invariants() == []
    assert np.min(np.abs(spec.eigenvalues)) < 1e-9
    assert len(spec.without_stationary()) == len(spec) - 1


def test_integrable_spectrum_is_real():
    spec = spectrum(build_superoperator(build_integrable_chain(4)))
    assert np.max(np.abs(spec.eigenvalues.imag)) <= 1e-8


def test_evolve_density_preserves_density(mbl4, rng):
    rho0 = random_density(mbl4.dim, rng)
    rho = evolve_density(mbl4, rho0, 2.0)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-10)
    np.testing.assert_array_equal(evolve_density(mbl4, rho0, 0.0), rho0)


def test_evolve_density_covers_remainder(mbl4, rng):
    rho0 = random_density(mbl4.dim, rng)
    superop = build_superoperator(mbl4)
    exact = unvec(scipy.linalg.expm(0.25 * superop.matrix.entries) @ vec(rho0), mbl4.dim)
    np.testing.assert_allclose(evolve_density(mbl4, rho0, 0.25, dt=0.1, superop=superop), exact, atol=1e-10)


def test_evolve_density_rejects_bad_input(mbl4):
    with pytest.raises(ValueError):
        evolve_density(mbl4, np.eye(mbl4.dim), 1.0)
    with pytest.raises(DimensionMismatchError):
        evolve_density(mbl4, np.eye(2) / 2, 1.0)


def test_written_spectrum_reads_back(tmp_path, mbl4):
    spec = spectrum(build_superoperator(mbl4))
    write_spectrum(spec, tmp_path / "spectrum.csv", {"master_seed": 7})
    loaded = parse_spectrum(tmp_path / "spectrum.csv")
    np.testing.assert_array_equal(loaded.eigenvalues, spec.eigenvalues)
    assert loaded.source_label == spec.source_label
    assert loaded.hilbert_dim == mbl4.dim


def test_evolve_density_is_a_semigroup(mbl4, rng):
    rho0 = random_density(mbl4.dim, rng)
    superop = build_superoperator(mbl4)
    direct = evolve_density(mbl4, rho0, 1.2, superop=superop)
    composed = evolve_density(mbl4, evolve_density(mbl4, rho0, 0.7, superop=superop), 0.5, superop=superop)
    np.testing.assert_allclose(direct, composed, atol=1e-10)


@pytest.mark.parametrize("gamma,t", [(1.0, 2.0), (0.5, 1.35)])
def test_amplitude_damping_population(gamma, t):
    qubit = decaying_qubit(gamma)
    rho = evolve_density(qubit, np.diag([0.0, 1.0]), t)
    assert rho[1, 1].real == pytest.approx(np.exp(-gamma * t), abs=1e-10)
    assert rho[0, 0].real == pytest.approx(1 - np.exp(-gamma * t), abs=1e-10)
    assert abs(rho[0, 1]) < 1e-12


def test_evolve_density_rejects_trace_drift():
    qubit = decaying_qubit()
    heff = effective_hamiltonian(qubit).matrix.entries
    eye = np.eye(2)
    # no-jump part only: populations leak out of the trace
    leaky = -1j * (np.kron(eye, heff) - np.kron(heff.conj(), eye))
    superop = Superoperator(hilbert_dim=2, matrix=ComplexOperator(leaky), label="leaky")
    with pytest.raises(NumericalInstabilityError):
        evolve_density(qubit, np.diag([0.0, 1.0]), 1.0, superop=superop)


def test_integrable_spectrum_is_reflection_invariant():
    model = build_integrable_chain(4)
    original = spectrum(build_superoperator(model)).eigenvalues
    reflected = spectrum(build_superoperator(reflect_sites(model))).eigenvalues
    np.testing.assert_allclose(np.sort(original.real), np.sort(reflected.real), atol=1e-8)
    np.testing.assert_allclose(np.sort(original.imag), np.sort(reflected.imag), atol=1e-8)
