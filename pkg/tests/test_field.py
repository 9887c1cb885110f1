import numpy as np
import pytest

from spfh.engine.errors import FieldError
from spfh.engine.field import EchelonBasis, FieldSpec, _rref_gf2, field_for_size


def test_field_for_size():
    assert field_for_size(2) == FieldSpec(2, 1)
    assert field_for_size(4) == FieldSpec(2, 2)
    assert field_for_size(9) == FieldSpec(3, 2)
    assert field_for_size(4).describe() == "GF(2^2)"
    assert field_for_size(3).describe() == "GF(3)"


@pytest.mark.parametrize("q", [1, 6, 12])
def test_field_for_size_rejects_non_prime_powers(q):
    with pytest.raises(FieldError):
        field_for_size(q)


def test_composite_characteristic_is_rejected():
    with pytest.raises(FieldError):
        FieldSpec(4, 1)


@pytest.mark.parametrize("q", [2, 3, 4, 8, 9, 16])
def test_inverses(q):
    f = field_for_size(q)
    a = np.arange(1, q)
    assert np.all(f.mul(a, f.inv(a)) == 1)


@pytest.mark.parametrize("q", [4, 8, 9])
def test_frobenius_has_order_r(q):
    f = field_for_size(q)
    x = f.elements()
    assert np.array_equal(f.frobenius(x, f.r), x)
    assert not np.array_equal(f.frobenius(x, 1), x)


@pytest.mark.parametrize("q", [2, 3, 4, 9])
def test_matrix_inverse(q):
    f = field_for_size(q)
    a, b, c = 1, q - 1, 1 if q == 2 else 2
    A = np.array([[a, b], [0, c]])
    assert np.array_equal(f.matmul(A, f.inverse(A)), f.identity(2))


@pytest.mark.parametrize("q", [2, 3, 4])
def test_kernel_is_annihilated(q, rng):
    f = field_for_size(q)
    A = f.random((4, 7), rng)
    K = f.kernel(A)
    assert K.shape == (7, 7 - f.rank(A))
    assert not f.matmul(A, K).any()


def test_solve(gf3, rng):
    A = gf3.random((5, 3), rng)
    x0 = np.array([1, 2, 0])
    B = gf3.matmul(A, x0)
    x = gf3.solve(A, B)
    assert x is not None
    assert np.array_equal(gf3.matmul(A, x), B)


def test_solve_inconsistent(gf2):
    A = np.array([[1, 0], [1, 0]])
    assert gf2.solve(A, np.array([1, 0])) is None


def test_bitpacked_rank_matches_dense(gf2, rng):
    M = rng.integers(0, 2, size=(40, 130))
    M[5] = M[3] ^ M[7]
    assert _rref_gf2(M)[0] == gf2._rref_dense(M)[0]


def test_echelon_basis_picks_greedily(gf2):
    E = EchelonBasis(gf2, 3)
    picked = E.extend(np.array([[1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]]))
    assert picked.tolist() == [0, 1, 3]
    assert E.rank == 3
    assert E.contains(np.array([1, 1, 1]))


def test_embedding_is_a_field_map():
    small, big = FieldSpec(2, 2), FieldSpec(2, 4)
    emb = big.embedding(small)
    a, b = np.meshgrid(small.elements(), small.elements())
    assert np.array_equal(emb[small.mul(a, b)], big.mul(emb[a], emb[b]))
    assert np.array_equal(emb[small.add(a, b)], big.add(emb[a], emb[b]))


def test_embedding_needs_divisibility():
    with pytest.raises(FieldError):
        FieldSpec(2, 3).embedding(FieldSpec(2, 2))


def test_rref_of_repeated_rows(gf2):
    rank, pivots, R = gf2.rref(np.array([[1, 1], [1, 1]]))
    assert rank == 1
    assert pivots == [0]
    assert R.tolist() == [[1, 1], [0, 0]]


def test_rref_of_identity_is_identity(gf3):
    rank, pivots, R = gf3.rref(gf3.identity(3))
    assert rank == 3
    assert pivots == [0, 1, 2]
    assert np.array_equal(R, gf3.identity(3))


def test_rref_singular_over_gf3(gf3):
    # det = 1*1 - 2*2 = 0 mod 3
    assert gf3.rref(np.array([[1, 2], [2, 1]]))[0] == 1


def test_frobenius_of_generator_in_gf4(gf4):
    # x^2 = x + 1 modulo x^2 + x + 1
    assert int(gf4.frobenius(2, 1)) == 3


def test_frobenius_composes_and_inverts():
    f = field_for_size(9)
    x = f.elements()
    assert np.array_equal(f.frobenius(f.frobenius(x, 1), -1), x)
    for a, b in [(1, 1), (1, -3), (2, 5)]:
        assert np.array_equal(f.frobenius(f.frobenius(x, a), b), f.frobenius(x, a + b))
