"""Functor expressions: syntax tree, canonical text and the text grammar.

    id | sym(d) | ext(d) | div(d) | ten(d) | twist(E,r) | mtwist(E,a,s)
       | param(E,[d0,d1,...]) | kuhn(E) | cdual(E) | E*E | E+E | E@E

`@` (compose) binds tighter than `*` (tensor), which binds tighter than `+`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import FrozenSet, List, Tuple
import hashlib
import itertools
import re

from spfh.engine.errors import ExpressionError

GRAMMAR_VERSION = 1

LEAF_KINDS = ("sym", "ext", "div", "ten")


class FunctorExpr:
    """Base class of expression nodes. Nodes are frozen dataclasses, so they hash and compare structurally."""

    def degrees(self, p: int) -> FrozenSet[int]:
        raise NotImplementedError

    def text(self) -> str:
        raise NotImplementedError

    def children(self) -> Tuple["FunctorExpr", ...]:
        return ()

    def key(self) -> str:
        return hashlib.sha256(f"v{GRAMMAR_VERSION}:{self.text()}".encode("utf-8")).hexdigest()

    def degree(self, p: int) -> int:
        """The degree of a homogeneous expression."""
        degs = self.degrees(p)
        if len(degs) != 1:
            raise ExpressionError(f"{self.text()} is not homogeneous", degrees=sorted(degs))
        return next(iter(degs))

    def max_degree(self, p: int) -> int:
        return max(self.degrees(p), default=0)

    def is_contravariant(self) -> bool:
        return any(c.is_contravariant() for c in self.children())

    def __str__(self) -> str:
        return self.text()

    def __add__(self, other: "FunctorExpr") -> "FunctorExpr":
        return direct_sum(self, other)

    def __mul__(self, other: "FunctorExpr") -> "FunctorExpr":
        return tensor(self, other)

    def __matmul__(self, other: "FunctorExpr") -> "FunctorExpr":
        return Compose(self, other)


@dataclass(frozen=True, eq=True)
class Ident(FunctorExpr):
    def degrees(self, p: int) -> FrozenSet[int]:
        return frozenset({1})

    def text(self) -> str:
        return "id"


@dataclass(frozen=True, eq=True)
class Leaf(FunctorExpr):
    kind: str
    d: int

    def __post_init__(self) -> None:
        if self.kind not in LEAF_KINDS:
            raise ExpressionError(f"unknown leaf {self.kind!r}")
        if self.d < 0:
            raise ExpressionError("leaf degree must be >= 0", d=self.d)

    def degrees(self, p: int) -> FrozenSet[int]:
        return frozenset({self.d})

    def text(self) -> str:
        return f"{self.kind}({self.d})"


@dataclass(frozen=True, eq=True)
class Twist(FunctorExpr):
    inner: FunctorExpr
    r: int

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ExpressionError("twist must be >= 0", r=self.r)

    def degrees(self, p: int) -> FrozenSet[int]:
        return frozenset(d * p**self.r for d in self.inner.degrees(p))

    def children(self) -> Tuple[FunctorExpr, ...]:
        return (self.inner,)

    def text(self) -> str:
        return f"twist({self.inner.text()},{self.r})"


@dataclass(frozen=True, eq=True)
class MultiTwist(FunctorExpr):
    """E composed with I^(0) + I^(a) + ... + I^((s-1)a)."""

    inner: FunctorExpr
    a: int
    s: int

    def __post_init__(self) -> None:
        if self.a < 0 or self.s < 1:
            raise ExpressionError("mtwist needs a >= 0 and s >= 1", a=self.a, s=self.s)

    def degrees(self, p: int) -> FrozenSet[int]:
        out = set()
        twists = [p ** (j * self.a) for j in range(self.s)]
        for d in self.inner.degrees(p):
            for combo in itertools.combinations_with_replacement(twists, d):
                out.add(sum(combo))
        return frozenset(out)

    def children(self) -> Tuple[FunctorExpr, ...]:
        return (self.inner,)

    def expanded(self) -> FunctorExpr:
        return Compose(self.inner, DirectSum(tuple(Twist(Ident(), j * self.a) for j in range(self.s))))

    def text(self) -> str:
        return f"mtwist({self.inner.text()},{self.a},{self.s})"


@dataclass(frozen=True, eq=True)
class Param(FunctorExpr):
    """E parametrized by a graded space with dims[j] copies in grade j."""

    inner: FunctorExpr
    dims: Tuple[int, ...]

    def __post_init__(self) -> None:
        if any(d < 0 for d in self.dims):
            raise ExpressionError("parameter dimensions must be >= 0")

    def degrees(self, p: int) -> FrozenSet[int]:
        return self.inner.degrees(p) if sum(self.dims) else frozenset({0} & self.inner.degrees(p))

    def children(self) -> Tuple[FunctorExpr, ...]:
        return (self.inner,)

    def text(self) -> str:
        return f"param({self.inner.text()},[{','.join(str(d) for d in self.dims)}])"


@dataclass(frozen=True, eq=True)
class Tensor(FunctorExpr):
    parts: Tuple[FunctorExpr, ...]

    def degrees(self, p: int) -> FrozenSet[int]:
        out = {0}
        for part in self.parts:
            out = {a + b for a in out for b in part.degrees(p)}
        return frozenset(out)

    def children(self) -> Tuple[FunctorExpr, ...]:
        return self.parts

    def text(self) -> str:
        return "*".join(_wrap(part, (DirectSum,)) for part in self.parts)


@dataclass(frozen=True, eq=True)
class DirectSum(FunctorExpr):
    parts: Tuple[FunctorExpr, ...]

    def degrees(self, p: int) -> FrozenSet[int]:
        out: set = set()
        for part in self.parts:
            out |= part.degrees(p)
        return frozenset(out)

    def children(self) -> Tuple[FunctorExpr, ...]:
        return self.parts

    def text(self) -> str:
        return "+".join(part.text() for part in self.parts)


@dataclass(frozen=True, eq=True)
class Compose(FunctorExpr):
    outer: FunctorExpr
    inner: FunctorExpr

    def degrees(self, p: int) -> FrozenSet[int]:
        inner = sorted(self.inner.degrees(p))
        out = set()
        for d in self.outer.degrees(p):
            for combo in itertools.combinations_with_replacement(inner, d):
                out.add(sum(combo))
        return frozenset(out)

    def children(self) -> Tuple[FunctorExpr, ...]:
        return (self.outer, self.inner)

    def text(self) -> str:
        left = _wrap(self.outer, (DirectSum, Tensor))
        right = _wrap(self.inner, (DirectSum, Tensor, Compose))
        return f"{left}@{right}"


@dataclass(frozen=True, eq=True)
class KuhnDual(FunctorExpr):
    inner: FunctorExpr

    def degrees(self, p: int) -> FrozenSet[int]:
        return self.inner.degrees(p)

    def children(self) -> Tuple[FunctorExpr, ...]:
        return (self.inner,)

    def text(self) -> str:
        return f"kuhn({self.inner.text()})"


@dataclass(frozen=True, eq=True)
class ContraDual(FunctorExpr):
    """The contravariant functor v -> X(v^dual). Only consumed by Tor."""

    inner: FunctorExpr

    def degrees(self, p: int) -> FrozenSet[int]:
        return self.inner.degrees(p)

    def children(self) -> Tuple[FunctorExpr, ...]:
        return (self.inner,)

    def is_contravariant(self) -> bool:
        return True

    def text(self) -> str:
        return f"cdual({self.inner.text()})"


def _wrap(e: FunctorExpr, kinds: tuple) -> str:
    return f"({e.text()})" if isinstance(e, kinds) else e.text()


# ---- constructors ----------------------------------------------------------------


def ident() -> Ident:
    return Ident()


def sym(d: int) -> Leaf:
    return Leaf("sym", d)


def ext(d: int) -> Leaf:
    return Leaf("ext", d)


def div(d: int) -> Leaf:
    return Leaf("div", d)


def ten(d: int) -> Leaf:
    return Leaf("ten", d)


def twist(e: FunctorExpr, r: int) -> FunctorExpr:
    if r == 0:
        return e
    if isinstance(e, Twist):
        return Twist(e.inner, e.r + r)
    return Twist(e, r)


def tensor(*parts: FunctorExpr) -> FunctorExpr:
    flat: List[FunctorExpr] = []
    for part in parts:
        flat.extend(part.parts if isinstance(part, Tensor) else (part,))
    return flat[0] if len(flat) == 1 else Tensor(tuple(flat))


def direct_sum(*parts: FunctorExpr) -> FunctorExpr:
    flat: List[FunctorExpr] = []
    for part in parts:
        flat.extend(part.parts if isinstance(part, DirectSum) else (part,))
    return flat[0] if len(flat) == 1 else DirectSum(tuple(flat))


def gamma(lam) -> FunctorExpr:
    """Gamma^lambda: tensor of the divided powers div(lam_i) over the nonzero parts."""
    parts = [div(int(x)) for x in lam if x > 0]
    if not parts:
        return div(0)
    return tensor(*parts)


# ---- parser ----------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([a-z]+)|(.))")


def _tokenize(text: str) -> List[str]:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        pos = m.end()
        tok = m.group(0).strip()
        if tok:
            tokens.append(tok)
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ExpressionError(
                f"expected {expected or 'token'} at position {self.pos} in {self.text!r}",
                found=tok,
            )
        self.pos += 1
        return tok

    def integer(self) -> int:
        tok = self.take()
        if not tok.isdigit():
            raise ExpressionError(f"expected an integer in {self.text!r}", found=tok)
        return int(tok)

    def parse(self) -> FunctorExpr:
        e = self.sum()
        if self.peek() is not None:
            raise ExpressionError(f"trailing input in {self.text!r}", found=self.peek())
        return e

    def sum(self) -> FunctorExpr:
        parts = [self.product()]
        while self.peek() == "+":
            self.take()
            parts.append(self.product())
        return direct_sum(*parts)

    def product(self) -> FunctorExpr:
        parts = [self.compose()]
        while self.peek() == "*":
            self.take()
            parts.append(self.compose())
        return tensor(*parts)

    def compose(self) -> FunctorExpr:
        e = self.atom()
        while self.peek() == "@":
            self.take()
            e = Compose(e, self.atom())
        return e

    def atom(self) -> FunctorExpr:
        tok = self.take()
        if tok == "(":
            e = self.sum()
            self.take(")")
            return e
        if tok == "id":
            return Ident()
        if tok in LEAF_KINDS:
            self.take("(")
            d = self.integer()
            self.take(")")
            return Leaf(tok, d)
        if tok == "twist":
            self.take("(")
            e = self.sum()
            self.take(",")
            r = self.integer()
            self.take(")")
            return twist(e, r) if r else Twist(e, 0)
        if tok == "mtwist":
            self.take("(")
            e = self.sum()
            self.take(",")
            a = self.integer()
            self.take(",")
            s = self.integer()
            self.take(")")
            return MultiTwist(e, a, s)
        if tok == "param":
            self.take("(")
            e = self.sum()
            self.take(",")
            self.take("[")
            dims = [self.integer()]
            while self.peek() == ",":
                self.take()
                dims.append(self.integer())
            self.take("]")
            self.take(")")
            return Param(e, tuple(dims))
        if tok in ("kuhn", "cdual"):
            self.take("(")
            e = self.sum()
            self.take(")")
            return KuhnDual(e) if tok == "kuhn" else ContraDual(e)
        raise ExpressionError(f"unexpected token {tok!r} in {self.text!r}")


@lru_cache(maxsize=1024)
def parse(text: str) -> FunctorExpr:
    return _Parser(text).parse()


def covariant_dual(e: FunctorExpr) -> FunctorExpr:
    """Rewrite a contravariant expression cdual(X) into the covariant kuhn(X); distributes over * and +."""
    if isinstance(e, ContraDual):
        if e.inner.is_contravariant():
            raise ExpressionError(f"nested contravariance in {e.text()}")
        return KuhnDual(e.inner)
    if isinstance(e, Tensor):
        return tensor(*(covariant_dual(part) for part in e.parts))
    if isinstance(e, DirectSum):
        return direct_sum(*(covariant_dual(part) for part in e.parts))
    raise ExpressionError(f"{e.text()} is not a contravariant expression")
