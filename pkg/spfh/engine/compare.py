"""Comparison maps from strict polynomial Ext to truncated functor-category Ext.

A class of Ext_P(F', G'') is a cocycle on a Gamma-resolution P of F'. Restricting P
to F_q-vector spaces gives a complex t*P that is exact objectwise, so the
projective resolution Q of t*F in the truncated category lifts into it. Composing
the lift with the restricted cocycle, then with a natural map t*G'' -> t*G, gives a
cocycle on Q. Ranks are taken on cohomology.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import hashlib
import json
import logging

import numpy as np

from spfh.app.config import settings
from spfh.engine.errors import ShapeError, SpfhError, TheoremContradiction
from spfh.engine.expr import FunctorExpr, MultiTwist, direct_sum, gamma, parse, twist
from spfh.engine.field import FieldSpec
from spfh.engine.fqcat import (
    CatExtComplex,
    CatModule,
    CatResolution,
    RestrictedModule,
    TruncCat,
    cat_ext,
    cat_resolve,
    restrict_functor,
)
from spfh.engine.generic import stable_bound
from spfh.engine.homalg import (
    ExtComplex,
    Resolution,
    cochain_map_rank,
    homogeneous_part,
    pullback_matrix,
    resolve,
)
from spfh.engine.polyfun import apply, evaluate, nat_map

log = logging.getLogger(__name__)

VERDICTS = ("iso", "not_surjective", "not_injective", "neither")


def verdict_for(rank: int, source: int, target: int) -> str:
    if rank == source == target:
        return "iso"
    if rank == source:
        return "not_surjective"
    if rank == target:
        return "not_injective"
    return "neither"


@dataclass
class ComparisonRow:
    degree: int
    source: int
    target: int
    rank: int
    covered: bool
    stable: Optional[bool] = None

    @property
    def verdict(self) -> str:
        return verdict_for(self.rank, self.source, self.target)

    @property
    def contradiction(self) -> bool:
        return self.covered and self.verdict != "iso"


@dataclass
class ComparisonReport:
    name: str
    params: Dict[str, Any]
    rows: List[ComparisonRow]
    notes: Dict[str, Any] = dc_field(default_factory=dict)
    matrices: Dict[str, np.ndarray] = dc_field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return not any(row.contradiction for row in self.rows)

    def to_records(self) -> List[Dict[str, Any]]:
        out = []
        for row in self.rows:
            out.append(
                {
                    "map": self.name,
                    **self.params,
                    "degree": row.degree,
                    "source": row.source,
                    "target": row.target,
                    "rank": row.rank,
                    "verdict": row.verdict,
                    "predicted": "iso" if row.covered else None,
                    "stable": row.stable,
                }
            )
        return out


# ---- the restricted strict resolution -----------------------------------------------------


class RestrictedResolution:
    """t*P for a Gamma-resolution P evaluated at rank n >= N.

    The differential at F_q^j is P(p_j) d P(i_j) for the standard inclusion i_j and
    projection p_j between k^j and k^n.
    """

    def __init__(self, res: Resolution, source: FunctorExpr, cat: TruncCat) -> None:
        self.res = res
        self.source = source
        self.cat = cat
        self.n = res.target.n
        if self.n < cat.N:
            raise ShapeError(f"strict rank {self.n} is below the truncation {cat.N}")
        self.terms: List[Optional[RestrictedModule]] = []
        for step in res.steps:
            expr = direct_sum(*(gamma(lam) for lam in step.lambdas)) if step.lambdas else None
            self.terms.append(RestrictedModule(expr, cat) if expr is not None else None)
        self.full = [res.full_matrix(i) for i in range(len(res.steps))]
        self._diffs: Dict[Tuple[int, int], np.ndarray] = {}

    def term_dim(self, i: int, j: int) -> int:
        term = self.terms[i]
        return term.dim(j) if term is not None else 0

    def include(self, i: int, j: int) -> np.ndarray:
        """P_i(i_j): P_i(k^j) -> P_i(k^n)."""
        term = self.terms[i]
        if term is None:
            return np.zeros((0, 0), dtype=np.int64)
        return apply(term.expr, self.cat.inclusion(j, self.n), self.cat.field)

    def _project(self, expr: Optional[FunctorExpr], j: int) -> np.ndarray:
        if expr is None:
            return np.zeros((0, 0), dtype=np.int64)
        return apply(expr, self.cat.projection(self.n, j), self.cat.field)

    def differential(self, i: int, j: int) -> np.ndarray:
        key = (i, j)
        hit = self._diffs.get(key)
        if hit is None:
            f = self.cat.field
            rows = self.source if i == 0 else (self.terms[i - 1].expr if self.terms[i - 1] is not None else None)
            cols_dim = self.term_dim(i, j)
            if rows is None or cols_dim == 0:
                row_dim = self.term_dim(i - 1, j) if i > 0 else RestrictedModule(self.source, self.cat).dim(j)
                hit = np.zeros((row_dim, cols_dim), dtype=np.int64)
            else:
                left = self._project(rows, j)
                hit = f.matmul(f.matmul(left, self.full[i]), self.include(i, j))
            self._diffs[key] = hit
        return hit


# ---- chain lift and cohomology map ----------------------------------------------------------


def lift_into_restricted(
    Q: CatResolution,
    sandwich: RestrictedResolution,
    from_source: Callable[[int], np.ndarray],
    *,
    rng: Optional[np.random.Generator] = None,
) -> List[List[np.ndarray]]:
    """Images w_l in (t*P_i)(j_l) of the generators of Q_i, over the map t*F -> t*F' given by from_source."""
    f = sandwich.cat.field
    cat = sandwich.cat
    images: List[List[np.ndarray]] = []
    for i, step in enumerate(Q.steps):
        if i >= len(sandwich.terms):
            break
        cur: List[np.ndarray] = []
        for j, v in step.generators:
            if i == 0:
                t = f.matmul(from_source(j), v)
            else:
                prev = Q.steps[i - 1].projective
                t = np.zeros(sandwich.term_dim(i - 1, j), dtype=np.int64)
                term = sandwich.terms[i - 1]
                for k, jk in enumerate(prev.js):
                    part = v[prev.slice(k, j)]
                    nz = np.flatnonzero(part)
                    if not nz.size or term is None:
                        continue
                    for u, c in zip(cat.morphisms(jk, j)[nz], part[nz]):
                        t = f.add(t, f.mul(int(c), term.apply_to(u, images[i - 1][k])))
            d = sandwich.differential(i, j)
            if d.shape[1] == 0:
                if t.any():
                    raise SpfhError(f"restricted resolution is not exact at step {i}, object {j}")
                cur.append(np.zeros(0, dtype=np.int64))
                continue
            w = f.solve(d, t)
            if w is None:
                raise SpfhError(f"restricted resolution is not exact at step {i}, object {j}")
            if rng is not None:
                K = f.kernel(d)
                if K.shape[1]:
                    w = f.add(w, f.matmul(K, f.random(K.shape[1], rng)))
            cur.append(w)
        images.append(cur)
    return images


def _transfer_matrix(
    i: int,
    Q: CatResolution,
    images: List[List[np.ndarray]],
    sandwich: RestrictedResolution,
    upper: ExtComplex,
    R: Callable[[int], np.ndarray],
) -> np.ndarray:
    """Cochain map Hom(P_i, B) -> Hom(Q_i, t*G): row block l is R_j c(P_i(i_j) w_l)."""
    f = upper.field
    P = sandwich.res.steps[i].projective
    B = upper.N
    cols = upper.cochain_dim(i)
    blocks = []
    for (j, _), w in zip(Q.steps[i].generators, images[i]):
        Rj = R(j)
        if Rj.shape[0] == 0:
            continue
        Z = np.zeros((B.dim, cols), dtype=np.int64)
        if w.size and cols:
            u = f.matmul(sandwich.include(i, j), w)
            vectors = []
            for mu, idx in P.module.blocks.items():
                if u[idx].any() and B.block_dim(mu):
                    vectors.append((mu, u[idx]))
            if vectors:
                stacked = pullback_matrix(vectors, P, upper.ytab)
                pos = 0
                for mu, _ in vectors:
                    size = B.block_dim(mu)
                    Z[B.block(mu)] = stacked[pos : pos + size]
                    pos += size
        blocks.append(f.matmul(Rj, Z))
    if not blocks:
        return np.zeros((0, cols), dtype=np.int64)
    return np.vstack(blocks)


@dataclass
class _Instance:
    strict_source: FunctorExpr
    strict_target: FunctorExpr
    degree: int
    cat_source: CatModule
    cat_target: CatModule
    from_source: Callable[[int], np.ndarray]
    to_target: Callable[[int], np.ndarray]
    max_expr_degree: int


def _compare(
    inst: _Instance,
    max_degree: int,
    covered: Callable[[int], bool],
    *,
    policy: str = "dominance",
    rng: Optional[np.random.Generator] = None,
) -> Tuple[List[ComparisonRow], Dict[str, np.ndarray]]:
    cat = inst.cat_source.cat
    f = cat.field
    D = inst.degree
    n = max(D, cat.N, 1)
    length = max_degree + 1

    Q = cat_resolve(inst.cat_source, length)
    lower = CatExtComplex(Q, inst.cat_target)

    A = homogeneous_part(evaluate(inst.strict_source, n, f), D)
    full_target = evaluate(inst.strict_target, n, f, max_degree=inst.max_expr_degree)
    comp_n = np.flatnonzero(full_target.weights.sum(axis=1) == D) if full_target.dim else np.zeros(0, dtype=np.int64)
    B = full_target.restrict(comp_n, label=f"{full_target.label}[deg {D}]")

    matrices: Dict[str, np.ndarray] = {}
    rows: List[ComparisonRow] = []
    if B.dim == 0 or A.dim == 0:
        for i in range(max_degree + 1):
            rows.append(ComparisonRow(i, 0, lower.dim(i), 0, covered(i)))
        return rows, matrices

    P = resolve(A, length, policy=policy)
    upper = ExtComplex(P, B)
    sandwich = RestrictedResolution(P, inst.strict_source, cat)
    images = lift_into_restricted(Q, sandwich, inst.from_source, rng=rng)

    R_cache: Dict[int, np.ndarray] = {}

    def R(j: int) -> np.ndarray:
        hit = R_cache.get(j)
        if hit is None:
            if inst.cat_target.dim(j) == 0 or j == 0:
                return np.zeros((inst.cat_target.dim(j), B.dim), dtype=np.int64)
            down = apply(inst.strict_target, cat.projection(n, j), f)[:, comp_n]
            hit = f.matmul(inst.to_target(j), down)
            R_cache[j] = hit
        return hit

    for i in range(max_degree + 1):
        T = _transfer_matrix(i, Q, images, sandwich, upper, R)
        m = cochain_map_rank(T, upper, lower, i)
        rows.append(ComparisonRow(i, m.source_dim, m.target_dim, m.rank, covered(i)))
        matrices[f"T{i}"] = T
        matrices[f"Z{i}"] = upper.representatives(i)
        matrices[f"B{i}"] = lower.coboundaries(i)
    return rows, matrices


def _stability(
    cat_source_expr: FunctorExpr,
    cat_target_expr: FunctorExpr,
    cat: TruncCat,
    max_degree: int,
    rows: List[ComparisonRow],
) -> Optional[bool]:
    """Recompute the cat-side dims at N + 1 and mark each row stable when they agree."""
    if cat.N + 1 > settings.max_truncation(cat.q):
        return None
    bigger = TruncCat(cat.q, cat.N + 1, cat.field)
    dims = cat_ext(restrict_functor(cat_source_expr, bigger), restrict_functor(cat_target_expr, bigger), max_degree).dims
    for row, d in zip(rows, dims):
        row.stable = row.target == d
    return all(row.stable for row in rows)


def _raise_if_contradicted(report: ComparisonReport, strict: bool) -> None:
    bad = [row for row in report.rows if row.contradiction]
    if not bad:
        return
    log.error("theorem-covered comparison %s %s is not an isomorphism: %s", report.name, report.params, bad)
    if strict:
        raise TheoremContradiction(
            f"{report.name} comparison fails inside the theorem's range",
            params=report.params,
            degrees=[row.degree for row in bad],
        )


def strong_phi(
    F: FunctorExpr,
    G: FunctorExpr,
    q: int,
    N: int,
    max_degree: int,
    *,
    n_twist: int = 0,
    field: Optional[FieldSpec] = None,
    check_stability: bool = False,
    check_twist: bool = False,
    strict: bool = True,
    rng: Optional[np.random.Generator] = None,
) -> ComparisonReport:
    """The strong comparison map Ext_P(F^(n), G^(n)) -> Ext(t*F^(n), t*G^(n)) at truncation N."""
    cat = TruncCat(q, N, field)
    p = cat.field.p
    Fn, Gn = twist(F, n_twist), twist(G, n_twist)
    D = Fn.degree(p)
    src, tgt = restrict_functor(Fn, cat), restrict_functor(Gn, cat)
    inst = _Instance(
        strict_source=Fn,
        strict_target=Gn,
        degree=D,
        cat_source=src,
        cat_target=tgt,
        from_source=lambda j: np.eye(src.dim(j), dtype=np.int64),
        to_target=lambda j: np.eye(tgt.dim(j), dtype=np.int64),
        max_expr_degree=max(Gn.max_degree(p), settings.max_degree),
    )
    bound = max(F.max_degree(p), G.max_degree(p))
    window = stable_bound(p, n_twist)
    rows, matrices = _compare(inst, max_degree, lambda i: bound < q and i < window, rng=rng)
    report = ComparisonReport(
        "strong",
        {"F": F.text(), "G": G.text(), "q": q, "N": N, "n_twist": n_twist},
        rows,
        matrices=matrices,
    )
    if check_stability:
        report.notes["stable"] = _stability(Fn, Gn, cat, max_degree, rows)
    if check_twist:
        again = strong_phi(F, G, q, N, max_degree, n_twist=n_twist + 1, field=field, strict=False)
        report.notes["twist_independent"] = [row.rank for row in rows] == [row.rank for row in again.rows]
    log.info("strong comparison %s -> %s at q=%d, N=%d: %s", F.text(), G.text(), q, N, [r.verdict for r in rows])
    _raise_if_contradicted(report, strict)
    return report


def gen_comp_map(
    F: FunctorExpr,
    G: FunctorExpr,
    q: int,
    s: int,
    N: int,
    max_degree: int,
    *,
    n_twist: int = 0,
    field: Optional[FieldSpec] = None,
    check_stability: bool = False,
    check_twist: bool = False,
    strict: bool = True,
    rng: Optional[np.random.Generator] = None,
) -> ComparisonReport:
    """Ext_gen(F^(rs-r), G^(r|s^2)) -> Ext(t*F, t*G), computed at twist level n_twist.

    The strict target is the homogeneous component of G^(r|s^2) matching deg F^(rs-r);
    it reaches t*G through the skew sum map and t*F reaches F^(rs-r) through the twist iso.
    n_twist must be a multiple of r: only then is the identity a natural iso t*F -> t*F^(a).
    """
    if s < 1:
        raise ShapeError("s must be >= 1")
    cat = TruncCat(q, N, field)
    f = cat.field
    p, r = cat.sub.p, cat.sub.r
    if n_twist % r:
        raise ShapeError(f"n_twist={n_twist} is not a multiple of r={r} at q={q}", n_twist=n_twist, r=r)
    a = r * s - r + n_twist
    Fs = twist(F, a)
    Gm = twist(MultiTwist(G, r, s * s), n_twist)
    D = Fs.degree(p)
    copies = s * s

    def from_source(j: int) -> np.ndarray:
        # t*F and t*F^(a) agree on F_q-points; the iso is the identity matrix
        if j == 0:
            return np.eye(inst.cat_source.dim(0), dtype=np.int64)
        return nat_map("iso", {"functor": F, "a": a}, j, f).matrix

    def to_target(j: int) -> np.ndarray:
        # G applied to the sum map (k^j)^(s^2) -> k^j, the skew sum on F_q-points
        return apply(G, np.hstack([np.eye(j, dtype=np.int64)] * copies), f)

    inst = _Instance(
        strict_source=Fs,
        strict_target=Gm,
        degree=D,
        cat_source=restrict_functor(F, cat),
        cat_target=restrict_functor(G, cat),
        from_source=from_source,
        to_target=to_target,
        max_expr_degree=max(Gm.max_degree(p), settings.max_degree),
    )
    bound = max(F.max_degree(p), G.max_degree(p))
    window = stable_bound(p, n_twist)
    rows, matrices = _compare(inst, max_degree, lambda i: bound < q**s and i < window, rng=rng)
    report = ComparisonReport(
        "generalized",
        {"F": F.text(), "G": G.text(), "q": q, "r": r, "s": s, "N": N, "n_twist": n_twist},
        rows,
        notes={"strict_source": Fs.text(), "strict_target": f"{Gm.text()}[deg {D}]"},
        matrices=matrices,
    )
    if check_stability:
        report.notes["stable"] = _stability(F, G, cat, max_degree, rows)
    if check_twist:
        again = gen_comp_map(F, G, q, s, N, max_degree, n_twist=n_twist + r, field=field, strict=False)
        report.notes["twist_independent"] = [row.rank for row in rows] == [row.rank for row in again.rows]
    log.info("generalized comparison %s -> %s at q=%d, s=%d, N=%d: %s", F.text(), G.text(), q, s, N, [r.verdict for r in rows])
    _raise_if_contradicted(report, strict)
    return report


# ---- suites -------------------------------------------------------------------------------


def run_instance(
    instance: Dict[str, Any],
    rng: Optional[np.random.Generator] = None,
    field: Optional[FieldSpec] = None,
) -> ComparisonReport:
    kind = instance.get("map", "strong")
    F, G = parse(instance["F"]), parse(instance["G"])
    common = dict(
        max_degree=int(instance.get("max_degree", 0)),
        n_twist=int(instance.get("n_twist", 0)),
        check_stability=bool(instance.get("stability", False)),
        check_twist=bool(instance.get("check_twist", False)),
        strict=False,
        rng=rng,
        field=field,
    )
    if kind == "strong":
        return strong_phi(F, G, int(instance["q"]), int(instance["N"]), **common)
    if kind in ("generalized", "gen_comp"):
        return gen_comp_map(F, G, int(instance["q"]), int(instance.get("s", 2)), int(instance["N"]), **common)
    raise ShapeError(f"unknown comparison map {kind!r}")


def dump_matrices(report: ComparisonReport, results_dir: Optional[str] = None) -> Path:
    out_dir = Path(results_dir or settings.results_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = hashlib.sha256(json.dumps(report.params, sort_keys=True).encode("utf-8")).hexdigest()[:12]
    path = out_dir / f"{report.name}-{tag}.npz"
    np.savez(path, **report.matrices)
    return path


def verdict_suite(
    config: Sequence[Dict[str, Any]],
    *,
    workers: Optional[int] = None,
    results_dir: Optional[str] = None,
) -> List[ComparisonReport]:
    """Run every instance; failing theorem-covered instances get their matrices dumped."""
    instances = list(config)
    if not instances:
        return []
    with ThreadPoolExecutor(max_workers=max(1, workers or settings.workers)) as pool:
        reports = list(pool.map(run_instance, instances))
    for report in reports:
        if not report.passed:
            path = dump_matrices(report, results_dir)
            log.error("comparison %s %s failed; matrices written to %s", report.name, report.params, path)
    return reports
