"""Closed-form answers: twisted Ext/Tor series, E_r gradings, and the GL-homology factor.

Everything here is dimension counting over graded generator sets, except the
engine modes, which route through homalg/generic for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from spfh.engine.errors import ExpressionError, ShapeError
from spfh.engine.expr import (
    Compose,
    ContraDual,
    DirectSum,
    FunctorExpr,
    Ident,
    KuhnDual,
    Leaf,
    MultiTwist,
    Param,
    Tensor,
    Twist,
    sym,
)
from spfh.engine.field import FieldSpec, field_for_size
from spfh.engine.generic import generic_tor
from spfh.engine.homalg import GradedDims, ext, homogeneous_part
from spfh.engine.polyfun import basis_weights, evaluate

log = logging.getLogger(__name__)

# pair -> (algebra kind, generator shift s); first letter is the twisted slot, second the parameter slot
EXT_PAIRS: Dict[str, Tuple[str, int]] = {
    "GS": ("S", 0),
    "GL": ("L", 1),
    "LS": ("L", 0),
    "LL": ("G", 1),
    "SS": ("G", 0),
    "GG": ("G", 2),
}

# pair -> (algebra kind, s); first letter is the parameter slot, second the twisted slot
TOR_PAIRS: Dict[str, Tuple[str, int]] = {
    "GG": ("G", 0),
    "LG": ("L", 1),
    "GL": ("L", 0),
    "LL": ("S", 1),
    "GS": ("S", 0),
    "SG": ("S", 2),
}

Key = Tuple[int, int, int]


@dataclass
class TriGradedSeries:
    """dims[(degree, weight, weight * p^r)], truncated at max_degree and max_weight."""

    pair: str
    p: int
    r: int
    max_degree: int
    max_weight: int
    dims: Dict[Key, int] = dc_field(default_factory=dict)

    def at_weight(self, d: int) -> Tuple[int, ...]:
        out = [0] * (self.max_degree + 1)
        for (deg, w, _), v in self.dims.items():
            if w == d:
                out[deg] = v
        return tuple(out)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair": self.pair,
            "p": self.p,
            "r": self.r,
            "max_degree": self.max_degree,
            "max_weight": self.max_weight,
            "dims": [{"degree": k[0], "weights": [k[1], k[2]], "dim": v} for k, v in sorted(self.dims.items())],
        }


@dataclass
class GradedSpace:
    dims: Tuple[int, ...]
    label: str = ""

    def __getitem__(self, j: int) -> int:
        return self.dims[j] if 0 <= j < len(self.dims) else 0

    def __len__(self) -> int:
        return len(self.dims)


# ---- free graded-commutative counting --------------------------------------------------


def generator_degrees(s: int, r: int, p: int, max_degree: int) -> List[int]:
    """Degrees 2ip^r + s(p^r - 1), i >= 0, up to max_degree."""
    q = p**r
    out = []
    i = 0
    while 2 * i * q + s * (q - 1) <= max_degree:
        out.append(2 * i * q + s * (q - 1))
        i += 1
    return out


def free_counts(kind: str, gens: Sequence[int], max_weight: int, max_degree: int) -> np.ndarray:
    """C[w, t]: monomials of weight w and degree t in the free algebra on gens.

    kind "S" and "G" count multisets (the two agree dimensionwise), "L" counts subsets.
    """
    if kind not in ("S", "G", "L"):
        raise ShapeError(f"unknown algebra kind {kind!r}")
    C = np.zeros((max_weight + 1, max_degree + 1), dtype=np.int64)
    C[0, 0] = 1
    for g in gens:
        if kind == "L":
            for w in range(max_weight, 0, -1):
                C[w, g:] += C[w - 1, : max_degree + 1 - g]
        else:
            for w in range(1, max_weight + 1):
                C[w, g:] += C[w - 1, : max_degree + 1 - g]
    return C


def _series(pair: str, table: Dict[str, Tuple[str, int]], V_dim: int, r: int, p: int,
            max_degree: int, max_weight: int) -> TriGradedSeries:
    if pair not in table:
        raise ShapeError(f"unsupported pair {pair!r}", known=sorted(table))
    if V_dim < 0 or r < 0 or max_degree < 0 or max_weight < 0:
        raise ShapeError("series parameters must be >= 0")
    kind, s = table[pair]
    gens = [g for g in generator_degrees(s, r, p, max_degree) for _ in range(V_dim)]
    C = free_counts(kind, gens, max_weight, max_degree)
    out = TriGradedSeries(pair, p, r, max_degree, max_weight)
    for w in range(max_weight + 1):
        for t in range(max_degree + 1):
            if C[w, t]:
                out.dims[(t, w, w * p**r)] = int(C[w, t])
    return out


def ffss_series(pair: str, V_dim: int, r: int, p: int, *, max_degree: int, max_weight: int = 3) -> TriGradedSeries:
    """Ext between a twisted exponential functor and a parametrized one, as a tri-graded table."""
    return _series(pair, EXT_PAIRS, V_dim, r, p, max_degree, max_weight)


def ffss_tor_series(pair: str, V_dim: int, r: int, p: int, *, max_degree: int, max_weight: int = 3) -> TriGradedSeries:
    """Tor between a dual parametrized functor and a twisted one, keyed (degree, parameter weight, twisted weight)."""
    out = _series(pair, TOR_PAIRS, V_dim, r, p, max_degree, max_weight)
    out.dims = {(t, w * p**r, w): v for (t, w, _), v in out.dims.items()}
    return out


def relabel_tor_key(key: Key) -> Key:
    """(degree, parameter weight, twisted weight) -> (degree, twisted weight, parameter weight)."""
    t, a, b = key
    return (t, b, a)


def relabel_tor_series(series: TriGradedSeries) -> Dict[Key, int]:
    return {relabel_tor_key(k): v for k, v in series.dims.items()}


# ---- E_r and parametrized gradings -----------------------------------------------------


def e_r_space(p: int, r: int, window: int) -> GradedSpace:
    dims = [1 if j % 2 == 0 and j // 2 < p**r else 0 for j in range(window + 1)]
    return GradedSpace(tuple(dims), label=f"E_{r}")


def e_infty_space(window: int) -> GradedSpace:
    return GradedSpace(tuple(1 if j % 2 == 0 else 0 for j in range(window + 1)), label="E_inf")


def _check_fragment(e: FunctorExpr) -> None:
    if isinstance(e, (ContraDual, KuhnDual)):
        raise ExpressionError(f"no parameter grading for {e.text()} outside the standard fragment")
    if not isinstance(e, (Ident, Leaf, Twist, MultiTwist, Param, Tensor, DirectSum, Compose)):
        raise ExpressionError(f"no parameter grading for {e.text()}")
    for child in e.children():
        _check_fragment(child)


def param_graded(G: FunctorExpr, dims: Sequence[int], *, p: int = 2, window: Optional[int] = None) -> Tuple[int, ...]:
    """Graded dimensions of G(V) for V with dims[j] basis vectors in degree j."""
    _check_fragment(G)
    dims = tuple(int(x) for x in dims)
    W, g = basis_weights(Param(G, dims), 1, p)
    top = window if window is not None else (int(g.max()) if g.size else 0)
    out = np.bincount(g[g <= top], minlength=top + 1) if g.size else np.zeros(top + 1, dtype=np.int64)
    return tuple(int(x) for x in out[: top + 1])


def e_infty_ext(
    G: FunctorExpr,
    window: int,
    F: Optional[FunctorExpr] = None,
    *,
    p: int = 2,
    field: Optional[FieldSpec] = None,
) -> GradedDims:
    """Ext(F, G) computed as Ext_P(F, G_E) with E = E_inf cut at the window.

    Without F this is Ext(Gamma^d, G) = G(E_inf), read off the grading alone.
    """
    if window < 0:
        raise ShapeError("window must be >= 0")
    E = e_infty_space(window)
    if F is None:
        dims = param_graded(G, E.dims, p=p, window=window)
        return GradedDims(dims, {"kind": "oracle", "formula": "G(E_inf)", "window": window})
    f = field if field is not None else field_for_size(p)
    d = F.degree(f.p)
    if G.degree(f.p) != d:
        return GradedDims((0,) * (window + 1), {"kind": "oracle", "formula": "Ext(F, G_E)", "window": window})
    n = max(d, 1)
    A = homogeneous_part(evaluate(F, n, f), d)
    GE = evaluate(Param(G, E.dims), n, f)
    total = [0] * (window + 1)
    for j in range(0, window + 1, 2):
        piece = GE.graded_piece(j)
        if piece.dim == 0:
            continue
        part = ext(A, piece, window - j)
        for i, v in enumerate(part.dims):
            total[i + j] += v
    log.info("E_inf ext of %s, %s up to %d: %s", F.text(), G.text(), window, total)
    return GradedDims(tuple(total), {"kind": "oracle", "formula": "Ext(F, G_E)", "window": window, "n": n})


# ---- the GL-homology factor ----------------------------------------------------------------


def example_one(d: int, ell: int, m: int, window: int, *, p: int = 2, rank: int = 1) -> Tuple[int, ...]:
    """Dims of S^{d/2}(T) with T of dimension ell*m*rank in every even degree; zero for odd d."""
    if d % 2:
        return (0,) * (window + 1)
    T = [ell * m * rank if j % 2 == 0 else 0 for j in range(window + 1)]
    return param_graded(sym(d // 2), T, p=p, window=window)


def gl_factor(
    F: FunctorExpr,
    G: FunctorExpr,
    ell: int,
    m: int,
    window: int,
    *,
    mode: str = "example",
    p: int = 2,
    field: Optional[FieldSpec] = None,
) -> GradedDims:
    """The functor-homology factor Tor^gen((F_Hom(k^m, k^ell))^dual, G).

    "example" evaluates the closed form S^{d/2}(T) with d = deg F (zero for odd d); "engine" runs
    generic Tor with the parameter Hom(k^m, k^ell) as an ungraded space.
    """
    if mode == "example":
        d = F.degree(p)
        dims = example_one(d, ell, m, window, p=p)
        return GradedDims(dims, {"kind": "oracle", "formula": "example", "d": d, "ell": ell, "m": m})
    if mode == "engine":
        f = field if field is not None else field_for_size(p)
        E = ContraDual(Param(F, (ell * m,)))
        dims, _ = generic_tor(E, G, window, f)
        return dims
    raise ShapeError(f"unknown gl_factor mode {mode!r}", known=["example", "engine"])
