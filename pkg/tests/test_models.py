from math import comb

import numpy as np
import pytest

from core.errors import BasisError, ModelParameterError
from core.models import (
    build_integrable_chain, build_mbl_chain, half_filling_basis, jordan_wigner_annihilators,
    model_from_params, neel_pattern, neel_state, pair_jump_matrix, reflect_sites,
    sample_disorder, sample_goe_observable, spin_chain_basis
)


@pytest.mark.parametrize("M", [2, 4, 6, 8])
def test_half_filling_dimension_and_order(M):
    basis = half_filling_basis(M)
    assert basis.dim == comb(M, M // 2)
    assert list(basis.occupation_table) == sorted(basis.occupation_table)
    assert all(bin(p).count("1") == M // 2 for p in basis.occupation_table)


def test_basis_index_round_trip_and_errors():
    basis = half_filling_basis(4)
    for i in range(basis.dim):
        assert basis.index(basis.pattern(i)) == i
    with pytest.raises(BasisError):
        basis.index(0b1110)
    with pytest.raises(BasisError):
        spin_chain_basis(3).index(8)


def test_neel_state():
    assert neel_pattern(4) == 0b1010
    psi = neel_state(half_filling_basis(4))
    assert psi.norm_sq == 1.0
    assert half_filling_basis(4).label(int(np.argmax(np.abs(psi.amplitudes)))) == "1010"


def test_jordan_wigner_anticommutation():
    c = [op.entries for op in jordan_wigner_annihilators(3)]
    for i in range(3):
        for j in range(3):
            anti = c[i] @ c[j].conj().T + c[j].conj().T @ c[i]
            np.testing.assert_allclose(anti, np.eye(8) * (i == j), atol=1e-14)
            np.testing.assert_allclose(c[i] @ c[j] + c[j] @ c[i], 0, atol=1e-14)


def _restrict(full, basis):
    idx = np.array(basis.occupation_table)
    return full[np.ix_(idx, idx)]


def test_mbl_hopping_matches_jordan_wigner():
    M, J = 4, 0.7
    c = [op.entries for op in jordan_wigner_annihilators(M)]
    hop = sum(-J * (c[l].conj().T @ c[l + 1] + c[l + 1].conj().T @ c[l]) for l in range(M - 1))
    model = build_mbl_chain(M, W=0.0, J=J, U=0.0, disorder=sample_disorder(M, 1))
    np.testing.assert_allclose(model.hamiltonian.entries, _restrict(hop, model.basis), atol=1e-14)


def test_mbl_interaction_and_disorder_are_diagonal():
    M, W, U = 4, 2.5, 0.8
    disorder = sample_disorder(M, 9)
    c = [op.entries for op in jordan_wigner_annihilators(M)]
    n = [ci.conj().T @ ci for ci in c]
    diag = sum(W * disorder.values[l] * n[l] for l in range(M))
    diag = diag + sum(U * n[l] @ n[l + 1] for l in range(M - 1))
    model = build_mbl_chain(M, W=W, J=0.0, U=U, disorder=disorder)
    np.testing.assert_allclose(model.hamiltonian.entries, _restrict(diag, model.basis), atol=1e-14)


def test_pair_dissipators_match_jordan_wigner():
    M = 4
    c = [op.entries for op in jordan_wigner_annihilators(M)]
    model = build_mbl_chain(M, W=1.0, disorder=sample_disorder(M, 2))
    assert len(model.jumps) == M - 1
    for l, (op, rate) in enumerate(model.jumps):
        full = (c[l].conj().T + c[l + 1].conj().T) @ (c[l] - c[l + 1])
        np.testing.assert_allclose(op.entries, _restrict(full, model.basis), atol=1e-14)
        assert rate == pytest.approx(0.1)


def test_mbl_defaults_and_validation():
    model = model_from_params("mbl", 6, W=3.0, disorder_seed=5)
    assert model.params["J"] == 1.0 and model.params["U"] == 1.0 and model.params["gamma"] == 0.1
    h = model.hamiltonian.entries
    np.testing.assert_allclose(h, h.conj().T, atol=0)
    with pytest.raises(ModelParameterError):
        model_from_params("mbl", 5, W=1.0)
    with pytest.raises(ModelParameterError):
        build_mbl_chain(4, W=-1.0, disorder=sample_disorder(4, 0))
    with pytest.raises(ModelParameterError):
        model_from_params("unknown", 4)


def test_integrable_chain():
    model = build_integrable_chain(4, eta=1, kappa=-1, gamma=1.0)
    assert model.dim == 16
    assert not np.any(model.hamiltonian.entries)
    assert len(model.jumps) == 3
    np.testing.assert_array_equal(pair_jump_matrix(1, -1).diagonal(), [1, 0, 0, -1])
    with pytest.raises(ModelParameterError):
        build_integrable_chain(4, eta=2)
    with pytest.raises(ModelParameterError):
        build_integrable_chain(11)


def test_integrable_chain_is_reflection_symmetric():
    model = build_integrable_chain(4)
    reflected = reflect_sites(model)
    originals = [op.entries for op in model.jump_operators]
    for op in reflected.jump_operators:
        assert any(np.array_equal(op.entries, o) for o in originals)


def test_disorder_is_per_site_and_deterministic():
    a = sample_disorder(6, 42)
    assert a == sample_disorder(6, 42)
    assert sample_disorder(4, 42).values == a.values[:4]
    assert all(-1.0 <= h <= 1.0 for h in a.values)
    assert sample_disorder(6, 43).values != a.values


def test_goe_observable():
    o = sample_goe_observable(10, seed=3)
    np.testing.assert_array_equal(o.entries, o.entries.T)
    np.testing.assert_array_equal(o.entries, sample_goe_observable(10, seed=3).entries)
    assert o.hermitian


def test_goe_semicircle_support():
    dim = 400
    eigenvalues = np.linalg.eigvalsh(sample_goe_observable(dim, seed=11).entries.real)
    # off-diagonal variance is 1/2, so the edge sits at 2 * sqrt(dim / 2)
    scaled = eigenvalues / np.sqrt(dim / 2)
    assert np.max(np.abs(scaled)) < 2.2
    assert np.mean(np.abs(scaled) < 1.0) > 0.55
