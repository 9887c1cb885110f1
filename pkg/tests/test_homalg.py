import numpy as np
import pytest

from spfh.engine.errors import ShapeError
from spfh.engine.expr import ContraDual, KuhnDual, direct_sum, div, ident, sym, twist
from spfh.engine.homalg import (
    ExtComplex,
    chain_lift,
    ext,
    ext_expr,
    hom_space,
    induced_rank,
    orbit_sum_ext,
    orbit_sum_hom_dim,
    resolve,
    tor,
    yoneda_cover,
)
from spfh.engine.polyfun import ModuleMap, evaluate

I1 = twist(ident(), 1)


def test_twisted_identity_ext(gf2):
    assert ext_expr(I1, I1, 2, gf2, 2).dims == (1, 0, 1)


def test_twisted_identity_matches_orbit_sums(gf2):
    assert orbit_sum_ext(I1, I1, 2, gf2, 2) == (1, 0, 1)


def test_identity_is_projective(gf3):
    assert ext_expr(ident(), ident(), 1, gf3, 2).dims == (1, 0, 0)


def test_hom_from_divided_powers(gf2):
    # Hom(Gamma^2, F) is the top weight space of F
    out = ext_expr(div(2), sym(2), 2, gf2, 2)
    assert out.dims == (1, 0, 0)
    assert out.certificate["kind"] == "exact"


def test_hom_space_across_degrees_is_zero(gf2):
    assert hom_space(evaluate(sym(1), 2, gf2), evaluate(sym(2), 2, gf2)) == []


def test_hom_space_maps_are_natural(gf3):
    maps = hom_space(evaluate(sym(2), 2, gf3), evaluate(sym(2), 2, gf3))
    assert len(maps) == 1
    assert maps[0].certified


def test_hom_dims_agree_with_orbit_sums(gf2):
    M, N = evaluate(div(2), 2, gf2), evaluate(sym(2), 2, gf2)
    assert len(hom_space(M, N)) == orbit_sum_hom_dim(div(2), sym(2), 2, gf2)


def test_resolution_is_a_complex(gf2):
    res = resolve(evaluate(I1, 2, gf2), 3)
    assert res.length == 3
    assert res.check_complex()
    for i in range(1, res.length + 1):
        d_prev, d = res.full_matrix(i - 1), res.full_matrix(i)
        assert not gf2.matmul(d_prev, d).any()


def test_cover_is_onto(gf3):
    M = evaluate(sym(2), 2, gf3)
    P, cover = yoneda_cover(M)
    assert gf3.rank(cover.matrix) == M.dim


def test_policies_agree(gf2):
    a = ext_expr(I1, I1, 2, gf2, 2, policy="dominance").dims
    b = ext_expr(I1, I1, 2, gf2, 2, policy="reverse").dims
    assert a == b


def test_unknown_policy(gf2):
    with pytest.raises(ShapeError):
        resolve(evaluate(I1, 2, gf2), 1, policy="random")


def test_tor_by_duality(gf2):
    out = tor(ContraDual(KuhnDual(I1)), I1, 2, 2, gf2)
    assert out.dims == (1, 0, 1)
    assert out.certificate["duality"] == "kuhn(kuhn(twist(id,1)))"


def test_inhomogeneous_ext_splits_by_degree(gf2):
    E = direct_sum(ident(), sym(2))
    assert ext_expr(E, E, 2, gf2, 1).dims[0] == 2


def test_supplied_resolution_is_reused(gf2):
    M = evaluate(I1, 2, gf2)
    res = resolve(M, 3)
    assert ext(M, M, 2, resolution=res).dims == (1, 0, 1)


def test_cocycle_representatives(gf2):
    out = ext_expr(I1, I1, 2, gf2, 2, cocycles=True)
    reps = out.certificate["cocycles"][2]
    assert [reps[i].shape[1] for i in range(3)] == [1, 0, 1]


def test_rank_mismatch(gf2):
    with pytest.raises(ShapeError):
        ext(evaluate(I1, 2, gf2), evaluate(I1, 3, gf2), 1)


@pytest.mark.slow
@pytest.mark.parametrize("X,want", [(sym(2), (1, 0, 0, 0)), (div(2), (0, 0, 1, 0))])
def test_twice_twisted_identity_against_once_twisted(gf2, X, want):
    assert ext_expr(twist(ident(), 2), twist(X, 1), 4, gf2, 3).dims == want


@pytest.mark.parametrize("seed", [None, 7])
def test_identity_lift_between_policies_is_an_iso_on_ext(gf2, seed):
    M = evaluate(I1, 2, gf2)
    P = resolve(M, 3)
    Q = resolve(M, 3, policy="reverse")
    identity = ModuleMap(M, M, np.eye(M.dim, dtype=np.int64), certified=True)
    rng = np.random.default_rng(seed) if seed is not None else None
    lift = chain_lift(identity, P, Q, rng=rng)
    upper, lower = ExtComplex(Q, M), ExtComplex(P, M)
    ranks = [induced_rank(lift, upper, lower, i).rank for i in range(3)]
    assert ranks == [1, 0, 1]


def test_ext_is_additive_in_both_arguments(gf2):
    both = direct_sum(I1, sym(2))
    first = ext_expr(both, I1, 2, gf2, 2).dims
    assert first == tuple(a + b for a, b in zip(ext_expr(I1, I1, 2, gf2, 2).dims, ext_expr(sym(2), I1, 2, gf2, 2).dims))
    second = ext_expr(I1, both, 2, gf2, 2).dims
    assert second == tuple(a + b for a, b in zip(ext_expr(I1, I1, 2, gf2, 2).dims, ext_expr(I1, sym(2), 2, gf2, 2).dims))
