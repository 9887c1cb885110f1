import pytest

from spfh.engine.errors import ExpressionError
from spfh.engine.expr import (
    ContraDual,
    Ident,
    KuhnDual,
    MultiTwist,
    Twist,
    covariant_dual,
    direct_sum,
    div,
    ext,
    ident,
    parse,
    sym,
    tensor,
    twist,
)


@pytest.mark.parametrize(
    "text",
    [
        "id",
        "twist(id,1)",
        "sym(2)*ext(1)+div(3)",
        "sym(2)@(id+twist(id,1))",
        "param(sym(2),[1,0,1])",
        "kuhn(sym(2))",
        "cdual(div(2))",
        "mtwist(id,1,2)",
    ],
)
def test_canonical_text(text):
    assert parse(text).text() == text


def test_whitespace_is_ignored():
    assert parse(" sym(2) * ext(1) ") == tensor(sym(2), ext(1))


def test_degrees():
    assert twist(sym(2), 1).degree(2) == 4
    assert twist(sym(2), 1).degree(3) == 6
    assert tensor(sym(2), ext(1)).degree(2) == 3
    assert direct_sum(sym(1), sym(2)).max_degree(2) == 2
    with pytest.raises(ExpressionError):
        direct_sum(sym(1), sym(2)).degree(2)


def test_multi_twist_degrees():
    assert MultiTwist(ident(), 1, 2).degrees(2) == frozenset({1, 2})
    assert MultiTwist(sym(2), 1, 2).degrees(2) == frozenset({2, 3, 4})


def test_twists_collapse():
    assert twist(twist(ident(), 1), 1) == Twist(Ident(), 2)
    assert twist(sym(2), 0) == sym(2)


def test_operators():
    assert sym(1) + sym(2) == direct_sum(sym(1), sym(2))
    assert sym(1) * div(2) == tensor(sym(1), div(2))


@pytest.mark.parametrize("text", ["sym(2", "foo(1)", "sym(2))", "twist(id)", ""])
def test_parse_errors(text):
    with pytest.raises(ExpressionError):
        parse(text)


def test_key_depends_on_text_only():
    assert parse("sym(2)*id").key() == tensor(sym(2), ident()).key()
    assert sym(2).key() != div(2).key()


def test_covariant_dual():
    assert covariant_dual(ContraDual(sym(2))) == KuhnDual(sym(2))
    both = tensor(ContraDual(sym(1)), ContraDual(div(2)))
    assert covariant_dual(both) == tensor(KuhnDual(sym(1)), KuhnDual(div(2)))
    with pytest.raises(ExpressionError):
        covariant_dual(sym(2))
