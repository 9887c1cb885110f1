"""Generic Ext/Tor: values stabilized under Frobenius twisting.

Ext^i(F^(r), G^(r)) -> Ext^i(F^(r+1), G^(r+1)) is injective and an isomorphism
once i < 2p^r. generic_ext computes at the least such r and, when the next level
is small enough, recomputes there and compares.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Dict, List, Optional, Tuple
import logging

import numpy as np

from spfh.app.config import settings
from spfh.engine.errors import DegreeCapError, ResourceCapError, ShapeError, TheoremContradiction
from spfh.engine.expr import FunctorExpr, covariant_dual, twist
from spfh.engine.field import FieldSpec
from spfh.engine.homalg import (
    ExtComplex,
    GammaSum,
    GradedDims,
    Resolution,
    chain_lift,
    homogeneous_part,
    induced_rank,
    resolve,
)
from spfh.engine.polyfun import ModuleMap, Weight, WeightedModule, evaluate

log = logging.getLogger(__name__)


def least_twist(p: int, imax: int) -> int:
    """Least r with 2p^r > imax."""
    r = 0
    while 2 * p**r <= imax:
        r += 1
    return r


def stable_bound(p: int, r: int) -> int:
    return 2 * p**r


@dataclass
class StableRangeCert:
    r: int
    p: int
    bound: int
    status: str = "claimed"
    matched: List[Dict[str, int]] = dc_field(default_factory=list)

    @property
    def degrees(self) -> range:
        return range(self.bound)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "stable_range",
            "r": self.r,
            "p": self.p,
            "bound": self.bound,
            "status": self.status,
            "matched": list(self.matched),
        }


def twist_match(d: int, e: int, p: int) -> Optional[Tuple[int, int]]:
    """Least (a, b) with d p^a = e p^b, or None when the degrees never meet."""
    if d == 0 or e == 0:
        return (0, 0) if d == e else None
    lo, hi, swap = (d, e, False) if d <= e else (e, d, True)
    if hi % lo:
        return None
    ratio, k = hi // lo, 0
    while ratio % p == 0:
        ratio //= p
        k += 1
    if ratio != 1:
        return None
    return (0, k) if swap else (k, 0)


# ---- twisted exact complexes ----------------------------------------------------------


def _divide(mu: Weight, p: int) -> Optional[Weight]:
    if any(x % p for x in mu):
        return None
    return tuple(x // p for x in mu)


class TwistedComplex:
    """P^(1): the Frobenius twist of a projective resolution.

    Same matrices, weights multiplied by p. It is exact over target = M^(1) but
    its terms are not projective.
    """

    def __init__(self, resolution: Resolution, p: int, target: WeightedModule) -> None:
        self.resolution = resolution
        self.p = p
        self.target = target
        self._modules: Dict[int, WeightedModule] = {}

    @property
    def length(self) -> int:
        return self.resolution.length

    def module(self, i: int) -> WeightedModule:
        hit = self._modules.get(i)
        if hit is None:
            P = self.resolution.steps[i].projective
            hit = GammaSum(P.lambdas, P.n, P.field, twist=1).module
            self._modules[i] = hit
        return hit

    def codomain(self, i: int) -> WeightedModule:
        return self.target if i == 0 else self.module(i - 1)

    def block(self, i: int, mu: Weight) -> np.ndarray:
        nu = _divide(tuple(mu), self.p)
        if nu is None:
            return np.zeros((self.codomain(i).block_dim(mu), self.module(i).block_dim(mu)), dtype=np.int64)
        return self.resolution.block(i, nu)


# ---- stabilization maps ----------------------------------------------------------------


@dataclass
class TwistMapRow:
    degree: int
    source_dim: int
    target_dim: int
    rank: int

    @property
    def injective(self) -> bool:
        return self.rank == self.source_dim

    @property
    def iso(self) -> bool:
        return self.rank == self.source_dim == self.target_dim

    def to_dict(self) -> Dict[str, Any]:
        return {
            "degree": self.degree,
            "source": self.source_dim,
            "target": self.target_dim,
            "rank": self.rank,
            "injective": self.injective,
            "iso": self.iso,
        }


def twist_map(
    F: FunctorExpr,
    G: FunctorExpr,
    r: int,
    max_degree: int,
    field: FieldSpec,
    *,
    n: Optional[int] = None,
    policy: str = "dominance",
) -> List[TwistMapRow]:
    """Ranks of Ext^i(F^(r), G^(r)) -> Ext^i(F^(r+1), G^(r+1)) for i = 0..max_degree.

    A resolution Q of F^(r+1) is lifted along the identity into the twisted
    resolution P^(1) of F^(r); cocycles of Hom(P, G^(r)) pull back through the lift.
    """
    p = field.p
    d, e = F.degree(p), G.degree(p)
    if d != e:
        return [TwistMapRow(i, 0, 0, 0) for i in range(max_degree + 1)]
    D = d * p ** (r + 1)
    rank_n = n if n is not None else max(D, 1)
    A = evaluate(twist(F, r), rank_n, field)
    A1 = evaluate(twist(F, r + 1), rank_n, field)
    B = evaluate(twist(G, r), rank_n, field)
    B1 = evaluate(twist(G, r + 1), rank_n, field)
    length = max_degree + 1
    P = resolve(A, length, policy=policy)
    Q = resolve(A1, length, policy=policy)
    identity = ModuleMap(A1, A1, np.eye(A1.dim, dtype=np.int64), certified=True, name="id")
    lift = chain_lift(identity, Q, TwistedComplex(P, p, A1))
    upper = ExtComplex(P, B)
    lower = ExtComplex(Q, B1)
    rows = []
    for i in range(max_degree + 1):
        m = induced_rank(lift, upper, lower, i, weight_map=lambda mu: _divide(mu, p))
        rows.append(TwistMapRow(i, m.source_dim, m.target_dim, m.rank))
    log.info(
        "twist map %s -> %s at r=%d: %s",
        F.text(),
        G.text(),
        r,
        [(row.source_dim, row.target_dim, row.rank) for row in rows],
    )
    return rows


# ---- generic Ext / Tor --------------------------------------------------------------------


def _twisted_ext(
    F: FunctorExpr,
    G: FunctorExpr,
    r: int,
    imax: int,
    field: FieldSpec,
    n: Optional[int],
    policy: str,
) -> Tuple[List[int], List[Dict[str, int]]]:
    p = field.p
    total = [0] * (imax + 1)
    matched: List[Dict[str, int]] = []
    for d in sorted(F.degrees(p)):
        for e in sorted(G.degrees(p)):
            pair = twist_match(d, e, p)
            if pair is None:
                continue
            a, b = pair
            D = d * p ** (r + a)
            rank_n = n if n is not None else max(D, 1)
            M = homogeneous_part(evaluate(twist(F, r + a), rank_n, field), D)
            N = homogeneous_part(evaluate(twist(G, r + b), rank_n, field), D)
            if M.dim == 0 or N.dim == 0:
                continue
            res = resolve(M, imax + 1, policy=policy)
            cx = ExtComplex(res, N)
            for i in range(imax + 1):
                total[i] += cx.dim(i)
            matched.append({"source_degree": d, "target_degree": e, "source_twist": r + a, "target_twist": r + b})
    return total, matched


def _max_twisted_degree(F: FunctorExpr, G: FunctorExpr, r: int, p: int) -> int:
    out = 0
    for d in F.degrees(p):
        for e in G.degrees(p):
            pair = twist_match(d, e, p)
            if pair is not None:
                out = max(out, d * p ** (r + pair[0]))
    return out


def generic_ext(
    F: FunctorExpr,
    G: FunctorExpr,
    imax: int,
    field: FieldSpec,
    *,
    n: Optional[int] = None,
    policy: str = "dominance",
    verify: bool = True,
) -> Tuple[GradedDims, StableRangeCert]:
    """Generic Ext^i(F, G) for i = 0..imax, with its stable-range certificate."""
    if imax < 0:
        raise ShapeError("imax must be >= 0")
    p = field.p
    r = least_twist(p, imax)
    cert = StableRangeCert(r=r, p=p, bound=stable_bound(p, r))
    try:
        dims, matched = _twisted_ext(F, G, r, imax, field, n, policy)
    except (ResourceCapError, DegreeCapError) as exc:
        raise ResourceCapError(
            f"generic ext of {F.text()}, {G.text()} infeasible at r={r}: {exc.message}",
            block=getattr(exc, "block", None),
            size=getattr(exc, "size", None),
            r=r,
        ) from exc
    cert.matched = matched

    if verify and matched and _max_twisted_degree(F, G, r + 1, p) <= settings.verify_max_degree:
        try:
            again, _ = _twisted_ext(F, G, r + 1, imax, field, n, policy)
        except (ResourceCapError, DegreeCapError) as exc:
            log.warning("stable range for %s, %s not verified at r=%d: %s", F.text(), G.text(), r + 1, exc.message)
        else:
            if again != dims:
                log.error("generic ext changed between r=%d and r=%d: %s vs %s", r, r + 1, dims, again)
                raise TheoremContradiction(
                    "generic ext is not stable inside the stable range",
                    r=r,
                    values=dims,
                    next_values=again,
                )
            cert.status = "verified"
    elif not matched:
        # no matched components: every value is zero at every r
        cert.status = "verified"
    if cert.status != "verified":
        log.warning("stable range for %s, %s is claimed, not verified (r=%d)", F.text(), G.text(), r)
    return GradedDims(tuple(dims), cert.to_dict()), cert


def generic_tor(
    E: FunctorExpr,
    F: FunctorExpr,
    imax: int,
    field: FieldSpec,
    **kwargs,
) -> Tuple[GradedDims, StableRangeCert]:
    """Generic Tor_i(E, F) for contravariant E, through the Kuhn dual of E."""
    X = covariant_dual(E)
    dims, cert = generic_ext(F, X, imax, field, **kwargs)
    dims.certificate["duality"] = X.text()
    return dims, cert
