from math import comb

import numpy as np
import pytest

from spfh.engine.errors import DegreeCapError, ExpressionError, UnknownMapError
from spfh.engine.expr import ContraDual, MultiTwist, Param, direct_sum, div, ext, ident, sym, ten, twist
from spfh.engine.polyfun import apply, evaluate, kuhn_dual, nat_map, weight_space


@pytest.mark.parametrize("n,d", [(2, 2), (3, 2), (3, 3)])
def test_dimensions(gf2, n, d):
    assert evaluate(sym(d), n, gf2).dim == comb(n + d - 1, d)
    assert evaluate(div(d), n, gf2).dim == comb(n + d - 1, d)
    assert evaluate(ext(d), n, gf2).dim == comb(n, d)
    assert evaluate(ten(d), n, gf2).dim == n**d


def test_weight_blocks(gf2):
    M = evaluate(sym(2), 2, gf2)
    assert set(M.blocks) == {(2, 0), (1, 1), (0, 2)}
    assert all(M.block_dim(mu) == 1 for mu in M.blocks)


def test_twist_multiplies_weights(gf3):
    M = evaluate(twist(ident(), 1), 2, gf3)
    assert M.dim == 2
    assert M.degrees == [3]
    assert set(M.blocks) == {(3, 0), (0, 3)}


def test_inhomogeneous_components(gf2):
    M = evaluate(direct_sum(ident(), sym(2)), 2, gf2)
    assert M.degrees == [1, 2]
    assert M.component(1).dim == 2
    assert M.component(2).dim == 3
    assert sorted(M.homogeneous_components()) == [1, 2]


def test_graded_pieces(gf2):
    M = evaluate(Param(sym(2), (1, 0, 1)), 1, gf2)
    assert [M.graded_piece(j).dim for j in range(5)] == [1, 0, 1, 0, 1]


@pytest.mark.parametrize("e", [sym(2), ext(2), div(2), ten(2), twist(ident(), 1)])
def test_apply_is_functorial(gf3, rng, e):
    A = gf3.random((2, 2), rng)
    B = gf3.random((2, 3), rng)
    lhs = apply(e, gf3.matmul(A, B), gf3)
    rhs = gf3.matmul(apply(e, A, gf3), apply(e, B, gf3))
    assert np.array_equal(lhs, rhs)


def test_apply_identity(gf4):
    assert np.array_equal(apply(sym(2), np.eye(2, dtype=np.int64), gf4), np.eye(3, dtype=np.int64))


@pytest.mark.parametrize(
    "name,context",
    [
        ("div_to_ten", {"d": 2}),
        ("ten_to_sym", {"d": 2}),
        ("ten_to_ext", {"d": 2}),
        ("sym_mult", {"a": 1, "b": 1}),
        ("div_comult", {"a": 1, "b": 1}),
        ("frobenius_power", {"r": 1}),
        ("iso", {"functor": sym(2)}),
    ],
)
def test_structure_maps_are_certified(gf2, name, context):
    assert nat_map(name, context, 2, gf2).certified


def test_twist_iso_is_only_pointwise(gf2):
    m = nat_map("iso", {"functor": ident(), "a": 1}, 2, gf2)
    assert m.scope == "points"
    assert np.array_equal(m.matrix, np.eye(2, dtype=np.int64))


def test_unknown_map(gf2):
    with pytest.raises(UnknownMapError):
        nat_map("no_such_map", {}, 2, gf2)


def test_kuhn_dual_is_an_involution(gf3):
    M = evaluate(sym(2), 2, gf3)
    back = kuhn_dual(kuhn_dual(M))
    for key in M.op_keys():
        assert np.array_equal(back.op_matrix(key), M.op_matrix(key))


def test_contravariant_cannot_be_evaluated(gf2):
    with pytest.raises(ExpressionError):
        evaluate(ContraDual(sym(2)), 2, gf2)


def test_degree_cap(gf2):
    with pytest.raises(DegreeCapError):
        evaluate(sym(11), 1, gf2)


def test_weight_space_of_tensor_square(gf2):
    M = evaluate(ten(2), 2, gf2)
    assert len(weight_space(M, (1, 1))) == 2
    assert len(weight_space(M, (2, 0))) == 1
    assert sorted(np.concatenate([weight_space(M, mu) for mu in M.blocks]).tolist()) == list(range(M.dim))


@pytest.mark.parametrize("expr", [sym(3), div(3), ten(3), ext(2), twist(ident(), 1)])
@pytest.mark.parametrize("fixture", ["gf2", "gf3"])
def test_divided_power_relations(request, fixture, expr):
    f = request.getfixturevalue(fixture)
    M = evaluate(expr, 3, f)
    D = M.max_degree
    for kind in ("e", "f"):
        for i in range(2):
            for a in range(1, D):
                for b in range(1, D - a + 1):
                    lhs = f.matmul(M.op_matrix((kind, i, a)), M.op_matrix((kind, i, b)))
                    rhs = f.mul(comb(a + b, a) % f.p, M.op_matrix((kind, i, a + b)))
                    assert np.array_equal(lhs, rhs), (kind, i, a, b)


def test_multi_twist_matches_its_expansion(gf2, rng):
    multi = MultiTwist(sym(2), 1, 2)
    M, E = evaluate(multi, 2, gf2), evaluate(multi.expanded(), 2, gf2)
    assert M.dim == E.dim
    assert {mu: M.block_dim(mu) for mu in M.blocks} == {mu: E.block_dim(mu) for mu in E.blocks}
    for _ in range(5):
        A = gf2.random((2, 2), rng)
        assert np.array_equal(apply(multi, A, gf2), apply(multi.expanded(), A, gf2))


def test_twist_is_the_pth_power_subobject_of_sym(gf3, rng):
    J = nat_map("frobenius_power", {"r": 1}, 2, gf3).matrix
    for _ in range(5):
        A = gf3.random((2, 2), rng)
        assert np.array_equal(
            gf3.matmul(apply(sym(3), A, gf3), J), gf3.matmul(J, apply(twist(ident(), 1), A, gf3))
        )
