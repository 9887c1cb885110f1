import numpy as np
import pytest

from spfh.engine.errors import ExpressionError, ResourceCapError, ShapeError
from spfh.engine.expr import ContraDual, KuhnDual, div, ident, sym, twist
from spfh.engine.field import FieldSpec
from spfh.engine.fqcat import (
    TruncCat,
    build_proj,
    cat_ext,
    cat_ext_expr,
    cat_resolve,
    cat_tor,
    restrict_functor,
    stabilization_scan,
)


def test_objects_and_morphisms():
    cat = TruncCat(2, 2)
    assert list(cat.objects) == [0, 1, 2]
    assert cat.morphisms(1, 2).shape == (4, 2, 1)
    assert cat.morphisms(2, 2).shape == (16, 2, 2)


def test_encode_decode():
    cat = TruncCat(3, 2)
    for index in (0, 5, 80):
        assert int(cat.encode(cat.decode(index, 2, 2))) == index


def test_inclusion_and_projection():
    cat = TruncCat(2, 3)
    i = cat.inclusion(1, 3)
    p = cat.projection(3, 1)
    assert i.shape == (3, 1) and p.shape == (1, 3)
    assert np.array_equal(cat.compose(p, i), np.eye(1, dtype=np.int64))


@pytest.mark.parametrize("q", [5, 6])
def test_unsupported_q(q):
    with pytest.raises(ShapeError):
        TruncCat(q, 1)


def test_truncation_cap():
    with pytest.raises(ResourceCapError):
        TruncCat(3, 4)


def test_restricted_dims_and_functoriality():
    cat = TruncCat(2, 2)
    M = restrict_functor(sym(2), cat)
    assert M.dims() == (0, 1, 3)
    assert M.certify_functoriality(samples=20)


def test_restricted_over_an_extension():
    cat = TruncCat(2, 2, FieldSpec(2, 2))
    M = restrict_functor(div(2), cat)
    assert M.certify_functoriality(samples=20)


def test_restricting_contravariant_fails():
    with pytest.raises(ExpressionError):
        restrict_functor(ContraDual(sym(1)), TruncCat(2, 1))


def test_projectives_are_functors():
    cat = TruncCat(2, 2)
    P = build_proj(cat, 1)
    assert P.dims() == (1, 2, 4)
    assert P.certify_functoriality(samples=20)


def test_projective_index_out_of_range():
    with pytest.raises(ShapeError):
        build_proj(TruncCat(2, 1), 2)


def test_hom_out_of_a_projective():
    cat = TruncCat(2, 2)
    out = cat_ext(build_proj(cat, 1), restrict_functor(sym(2), cat), 1)
    assert out.dims == (1, 0)


def test_resolution_differentials_compose_to_zero():
    cat = TruncCat(2, 2)
    res = cat_resolve(restrict_functor(ident(), cat), 2)
    f = cat.field
    for i in range(1, res.length + 1):
        for m in cat.objects:
            a, b = res.steps[i - 1].differential[m], res.steps[i].differential[m]
            if a.size and b.size:
                assert not f.matmul(a, b).any()


@pytest.mark.parametrize("N", [2, 3])
def test_hom_counterexample(N):
    # t*Sym(1) -> t*Sym(2) has the Frobenius map x -> x^2 on F_2-points
    assert cat_ext_expr(sym(1), sym(2), TruncCat(2, N), 0).dims == (1,)


def test_identity_ext_low_degrees():
    out = cat_ext_expr(ident(), ident(), TruncCat(2, 3), 1)
    assert out.dims == (1, 0)
    assert out.certificate["kind"] == "truncation"


def test_cat_tor_by_duality():
    cat = TruncCat(2, 2)
    want = cat_ext_expr(ident(), KuhnDual(sym(1)), cat, 1).dims
    assert cat_tor(ContraDual(sym(1)), ident(), cat, 1).dims == want


def test_twisted_identity_restricts_to_identity():
    cat = TruncCat(2, 2)
    a = cat_ext_expr(twist(ident(), 1), ident(), cat, 1).dims
    b = cat_ext_expr(ident(), ident(), cat, 1).dims
    assert a == b


def test_stabilization_scan():
    report = stabilization_scan(sym(1), sym(2), 2, 0, [2, 3])
    assert report.table == {2: (1,), 3: (1,)}
    assert report.stable == [True]
    assert report.to_dict()["truncations"] == [2, 3]


@pytest.mark.slow
def test_identity_ext_stabilizes():
    report = stabilization_scan(ident(), ident(), 2, 3, [3, 4])
    assert report.table[4] == (1, 0, 1, 0)
    assert all(report.stable)


def _assert_factorizations(cat, a, b):
    sub = cat.sub
    for h in cat.morphisms(a, b):
        T, k, S = cat.factor(h)
        assert k == sub.rank(h)
        assert sub.rank(T) == b and sub.rank(S) == a
        through = sub.matmul(sub.matmul(T, cat.inclusion(k, b)), sub.matmul(cat.projection(a, k), S))
        assert np.array_equal(through, h)


@pytest.mark.parametrize("q,N", [(2, 3), (3, 2), (4, 2)])
def test_every_map_factors_through_its_image(q, N):
    cat = TruncCat(q, N)
    for a in cat.objects:
        for b in cat.objects:
            _assert_factorizations(cat, a, b)


@pytest.mark.slow
@pytest.mark.parametrize("q,N", [(2, 4), (3, 3)])
def test_every_map_factors_through_its_image_large(q, N):
    cat = TruncCat(q, N)
    for a in cat.objects:
        for b in cat.objects:
            _assert_factorizations(cat, a, b)


def test_generators_cover_adjacent_objects_and_gl():
    cat = TruncCat(4, 2)
    gens = cat.generators()
    assert [g.shape for g in gens["inclusions"]] == [(1, 0), (2, 1)]
    assert [g.shape for g in gens["projections"]] == [(0, 1), (1, 2)]
    # two transvection directions times an F_2-basis {1, x} of F_4, plus the scalar diagonal at m = 1, 2
    assert len(gens["gl"]) == 1 + (2 * 2 + 1)
    assert all(cat.sub.rank(g) == g.shape[0] for g in gens["gl"])


def test_restricted_twist_over_gf4_is_functorial():
    cat = TruncCat(4, 2)
    assert restrict_functor(twist(ident(), 1), cat).certify_functoriality(samples=20)


def test_truncation_cap_comes_from_settings(monkeypatch):
    from spfh.app.config import settings

    assert settings.max_truncation(2) == settings.max_truncation_q2
    monkeypatch.setattr(settings, "max_truncation_other", 2)
    assert settings.max_truncation(3) == 2
    with pytest.raises(ResourceCapError):
        TruncCat(3, 3)
    TruncCat(3, 2)
