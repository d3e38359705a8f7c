import numpy as np
import pytest

from conftest import random_density
from core.errors import DegenerateStateError, DimensionMismatchError, NumericError, OperatorSizeError
from core.linalg import (
    ComplexOperator, PureState, commutator, dagger, density_problems, expectation, expectation_value,
    from_coo, identity, kron, kron_chain, matexp, projector, trace_distance
)

SIGMA_X = np.array([[0, 1], [1, 0]])
SIGMA_Z = np.array([[1, 0], [0, -1]])


def test_kron_entry_layout(rng):
    a = ComplexOperator(rng.standard_normal((2, 2)))
    b = ComplexOperator(rng.standard_normal((3, 3)))
    ab = kron(a, b).entries
    for i, j, k, l in [(0, 1, 2, 0), (1, 0, 1, 1), (1, 1, 0, 2)]:
        assert ab[i * 3 + k, j * 3 + l] == a.entries[i, j] * b.entries[k, l]


def test_kron_chain_is_associative(rng):
    ops = [ComplexOperator(rng.standard_normal((2, 2))) for _ in range(3)]
    np.testing.assert_allclose(kron_chain(ops).entries, kron(ops[0], kron(ops[1], ops[2])).entries, atol=1e-14)


def test_kron_refuses_oversized_products():
    big = identity(200)
    with pytest.raises(OperatorSizeError):
        kron(big, big)


def test_kron_of_hermitian_factors_is_flagged_hermitian():
    assert kron(identity(2), ComplexOperator(SIGMA_Z, hermitian=True)).hermitian


def test_matexp_rotation():
    theta = 0.37
    u = matexp(ComplexOperator(-1j * SIGMA_X), theta).entries
    expected = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * SIGMA_X
    np.testing.assert_allclose(u, expected, atol=1e-14)


def test_matexp_at_zero_is_identity(rng):
    a = ComplexOperator(rng.standard_normal((5, 5)))
    np.testing.assert_allclose(matexp(a, 0.0).entries, np.eye(5), atol=0)


@pytest.mark.parametrize("dim", [2, 7, 16])
def test_matexp_composes_over_time(dim, rng):
    a = ComplexOperator((rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(dim))
    t1, t2 = 0.3, 0.45
    composed = matexp(a, t1).entries @ matexp(a, t2).entries
    np.testing.assert_allclose(matexp(a, t1 + t2).entries, composed, atol=1e-8)


def test_matexp_rejects_non_finite():
    with pytest.raises(NumericError):
        matexp(ComplexOperator(np.array([[np.inf, 0], [0, 1]])), 1.0)


def test_flagged_hermitian_is_checked():
    with pytest.raises(NumericError):
        ComplexOperator(np.array([[0, 1], [0, 0]]), hermitian=True)


def test_operator_must_be_square():
    with pytest.raises(DimensionMismatchError):
        ComplexOperator(np.zeros((2, 3)))


def test_expectation_ignores_norm():
    o = ComplexOperator(SIGMA_Z, hermitian=True)
    psi = PureState(np.array([0.6, 0.8]))
    shrunk = PureState(0.1 * psi.amplitudes)
    assert expectation(o, psi) == pytest.approx(0.36 - 0.64)
    assert expectation(o, shrunk) == pytest.approx(expectation(o, psi), abs=1e-14)


def test_expectation_requires_hermitian_observable():
    with pytest.raises(NumericError):
        expectation(ComplexOperator(np.eye(2), hermitian=False), PureState(np.array([1.0, 0.0])))


def test_expectation_catches_imaginary_part():
    skew = ComplexOperator(np.array([[0, 1], [-1, 0]]))
    psi = PureState(np.array([1.0, 1j]) / np.sqrt(2))
    with pytest.raises(NumericError):
        expectation(skew, psi)
    with pytest.raises(NumericError):
        expectation_value(skew.entries, psi.amplitudes)
    # a non-Hermitian operator with a real expectation on this state passes
    assert expectation_value(np.array([[1, 2], [0, 1]]), np.array([1.0, 0.0])) == pytest.approx(1.0)


def test_expectation_on_zero_state_raises():
    with pytest.raises(DegenerateStateError):
        expectation(identity(2), PureState(np.zeros(2)))


def test_normalized_state():
    psi = PureState(np.array([3.0, 4.0j]))
    assert psi.norm_sq == pytest.approx(25.0)
    assert psi.normalized().norm_sq == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DegenerateStateError):
        PureState(np.zeros(3)).normalized()


def test_pure_state_is_read_only():
    psi = PureState(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 2.0


def test_trace_distance_of_orthogonal_pure_states():
    up = projector(PureState(np.array([1.0, 0.0])))
    down = projector(PureState(np.array([0.0, 1.0])))
    assert trace_distance(up, down) == pytest.approx(1.0)
    assert trace_distance(up, up) == pytest.approx(0.0, abs=1e-15)


def test_trace_distance_to_maximally_mixed_qubit():
    zero = projector(PureState(np.array([1.0, 0.0])))
    assert trace_distance(zero, np.eye(2) / 2) == pytest.approx(0.5)


def test_trace_distance_triangle_inequality(rng):
    for dim in (2, 3, 6):
        for _ in range(20):
            a, b, c = (random_density(dim, rng) for _ in range(3))
            assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12


def test_trace_distance_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        trace_distance(np.eye(2) / 2, np.eye(3) / 3)


def test_density_problems():
    assert density_problems(np.eye(2) / 2) == []
    problems = density_problems(np.diag([1.5, -0.5]))
    assert any("negative eigenvalue" in p for p in problems)
    assert any("trace" in p for p in density_problems(np.eye(2)))


def test_from_coo_sums_duplicates():
    op = from_coo(2, [0, 0, 1], [1, 1, 0], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(op.entries, np.array([[0, 3], [3, 0]]))


def test_dagger_and_commutator():
    sm = ComplexOperator(np.array([[0, 1], [0, 0]]))
    sp = dagger(sm)
    np.testing.assert_array_equal(sp.entries, np.array([[0, 0], [1, 0]]))
    np.testing.assert_array_equal(commutator(sp, sm).entries, -SIGMA_Z)
