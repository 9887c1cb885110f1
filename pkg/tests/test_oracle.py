import pytest

from spfh.engine.errors import ExpressionError, ShapeError
from spfh.engine.expr import KuhnDual, ext, ident, sym, twist
from spfh.engine.homalg import ext_expr
from spfh.engine.oracle import (
    e_infty_ext,
    e_infty_space,
    e_r_space,
    example_one,
    ffss_series,
    ffss_tor_series,
    free_counts,
    generator_degrees,
    gl_factor,
    param_graded,
    relabel_tor_key,
    relabel_tor_series,
)


def test_generator_degrees():
    assert generator_degrees(0, 1, 2, 8) == [0, 4, 8]
    assert generator_degrees(2, 1, 2, 7) == [2, 6]
    assert generator_degrees(1, 1, 3, 10) == [2, 8]


def test_free_counts():
    C = free_counts("S", [1, 1], 2, 2)
    assert C[2, 2] == 3
    C = free_counts("L", [1, 1], 2, 2)
    assert C[2, 2] == 1
    with pytest.raises(ShapeError):
        free_counts("X", [1], 1, 1)


def test_gamma_sym_weight_two():
    series = ffss_series("GS", 1, 1, 2, max_degree=8, max_weight=2)
    assert series.at_weight(2) == (1, 0, 0, 0, 1, 0, 0, 0, 2)
    assert series.dims[(8, 2, 4)] == 2


def test_gamma_gamma_weight_one():
    assert ffss_series("GG", 1, 1, 2, max_degree=3, max_weight=1).at_weight(1) == (0, 0, 1, 0)


def test_unknown_pair():
    with pytest.raises(ShapeError):
        ffss_series("XY", 1, 1, 2, max_degree=3)


@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("r", [0, 1, 2])
def test_tor_tables_relabel_to_ext_tables(p, r):
    ext_side = ffss_series("GS", 1, r, p, max_degree=20, max_weight=3).dims
    tor_side = ffss_tor_series("GG", 1, r, p, max_degree=20, max_weight=3)
    assert relabel_tor_series(tor_side) == ext_side


def test_relabel_key():
    assert relabel_tor_key((4, 2, 1)) == (4, 1, 2)


def test_series_agree_with_the_engine(gf2):
    got = ext_expr(twist(ident(), 1), twist(ident(), 1), 2, gf2, 2).dims
    want = ffss_series("GS", 1, 1, 2, max_degree=2, max_weight=1).at_weight(1)
    assert got == want == (1, 0, 1)


def test_graded_spaces():
    assert e_r_space(2, 1, 6).dims == (1, 0, 1, 0, 0, 0, 0)
    assert e_infty_space(4).dims == (1, 0, 1, 0, 1)
    assert e_infty_space(4)[7] == 0


def test_param_graded():
    assert param_graded(sym(2), [1, 0, 1]) == (1, 0, 1, 0, 1)
    assert param_graded(ext(2), [1, 0, 1]) == (0, 0, 1)
    with pytest.raises(ExpressionError):
        param_graded(KuhnDual(sym(2)), [1])


def test_e_infty_of_sym():
    out = e_infty_ext(sym(2), 4)
    assert out.dims == (1, 0, 1, 0, 2)
    assert out.certificate["kind"] == "oracle"


def test_e_infty_engine_form(gf2):
    assert e_infty_ext(ident(), 2, ident(), field=gf2).dims == (1, 0, 1)


def test_example_one_vanishes_for_odd_degrees():
    for d in range(1, 10, 2):
        assert not any(example_one(d, 2, 3, 12))


def test_example_one_even():
    assert example_one(2, 1, 1, 4) == (1, 0, 1, 0, 1)
    assert example_one(2, 2, 1, 2) == (2, 0, 2)


def test_gl_factor_example_mode():
    assert gl_factor(sym(2), sym(2), 1, 1, 4).dims == example_one(2, 1, 1, 4)
    with pytest.raises(ShapeError):
        gl_factor(sym(2), sym(2), 1, 1, 4, mode="guess")
