"""The truncated functor category over F_q.

Objects are F_q^0 .. F_q^N and morphisms a -> b are all b x a matrices over F_q,
numbered by their entries read row-major as little-endian base-q digits. A
CatModule assigns a k-vector space to every object and a matrix to every
morphism, computed on demand.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import threading

import numpy as np

from spfh.app.config import settings
from spfh.engine.errors import ExpressionError, ResourceCapError, ShapeError, SpfhError
from spfh.engine.expr import FunctorExpr, covariant_dual
from spfh.engine.field import EchelonBasis, FieldSpec, field_for_size
from spfh.engine.homalg import CochainComplex, GradedDims
from spfh.engine.polyfun import apply, dimension

log = logging.getLogger(__name__)


class TruncCat:
    """F_q-vector spaces of dimension <= N over a coefficient field k containing F_q."""

    def __init__(self, q: int, N: int, field: Optional[FieldSpec] = None) -> None:
        if q not in settings.fq_sizes_list:
            raise ShapeError(f"q={q} is not a supported truncated-category field", supported=settings.fq_sizes_list)
        if N < 0 or N > settings.max_truncation(q):
            raise ResourceCapError(
                f"truncation N={N} exceeds the cap {settings.max_truncation(q)} at q={q}",
                block=f"N={N}",
                size=q ** (N * N),
            )
        self.q = q
        self.N = N
        self.sub = field_for_size(q)
        self.field = field if field is not None else self.sub
        self.embed = self.field.embedding(self.sub)
        self._mor: Dict[Tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"TruncCat(q={self.q}, N={self.N}, k={self.field.describe()})"

    @property
    def objects(self) -> range:
        return range(self.N + 1)

    def count(self, a: int, b: int) -> int:
        return self.q ** (a * b)

    def morphisms(self, a: int, b: int) -> np.ndarray:
        """All maps F_q^a -> F_q^b, shape (q^(ab), b, a), in index order."""
        hit = self._mor.get((a, b))
        if hit is None:
            n = a * b
            idx = np.arange(self.q**n, dtype=np.int64)
            digits = (idx[:, None] // (self.q ** np.arange(n, dtype=np.int64))[None, :]) % self.q
            hit = digits.reshape(self.q**n, b, a)
            with self._lock:
                self._mor.setdefault((a, b), hit)
        return self._mor[(a, b)]

    def encode(self, h: np.ndarray) -> np.ndarray:
        """Index of a matrix (or of a stack of matrices) over F_q."""
        h = np.asarray(h, dtype=np.int64)
        n = h.shape[-1] * h.shape[-2]
        flat = h.reshape(h.shape[:-2] + (n,))
        return (flat * (self.q ** np.arange(n, dtype=np.int64))).sum(axis=-1)

    def decode(self, index: int, a: int, b: int) -> np.ndarray:
        return self.morphisms(a, b)[int(index)]

    def compose(self, h: np.ndarray, g: np.ndarray) -> np.ndarray:
        """h after g, over F_q."""
        return self.sub.matmul(h, g)

    def post_indices(self, h: np.ndarray, j: int) -> np.ndarray:
        """For every g: F_q^j -> F_q^a, the index of h g."""
        a = h.shape[1]
        return self.encode(self.sub.matmul(h[None, :, :], self.morphisms(j, a)))

    def pre_indices(self, u: np.ndarray, m: int) -> np.ndarray:
        """For every g: F_q^b -> F_q^m, the index of g u (u: F_q^a -> F_q^b)."""
        b = u.shape[0]
        return self.encode(self.sub.matmul(self.morphisms(b, m), u[None, :, :]))

    def lift(self, h: np.ndarray) -> np.ndarray:
        """A matrix over F_q as a matrix over k."""
        return self.embed[np.asarray(h, dtype=np.int64)]

    def inclusion(self, a: int, b: int) -> np.ndarray:
        out = np.zeros((b, a), dtype=np.int64)
        k = min(a, b)
        out[np.arange(k), np.arange(k)] = 1
        return out

    def projection(self, a: int, b: int) -> np.ndarray:
        return self.inclusion(a, b)

    def gl_generators(self, m: int) -> List[np.ndarray]:
        """Transvections 1 + x E_ij over an additive F_p-basis x of F_q, and diag(g, 1, ...) when q > 2."""
        sub = self.sub
        gens = []
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                for t in range(sub.r):
                    g = np.eye(m, dtype=np.int64)
                    g[i, j] = sub.p**t
                    gens.append(g)
        if self.q > 2 and m:
            g = np.eye(m, dtype=np.int64)
            g[0, 0] = sub.generator
            gens.append(g)
        return gens

    def generators(self) -> Dict[str, List[np.ndarray]]:
        return {
            "inclusions": [self.inclusion(a, a + 1) for a in range(self.N)],
            "projections": [self.projection(a + 1, a) for a in range(self.N)],
            "gl": [g for m in self.objects for g in self.gl_generators(m)],
        }

    def factor(self, h: np.ndarray) -> Tuple[np.ndarray, int, np.ndarray]:
        """(T, k, S) with h = T i_k p_k S, T and S invertible, i_k / p_k the standard inclusion / projection."""
        sub = self.sub
        h = np.asarray(h, dtype=np.int64)
        b, a = h.shape
        rank, pivots, R = sub.rref(np.hstack([h, np.eye(b, dtype=np.int64)]))
        pivots = [c for c in pivots if c < a]
        k = len(pivots)
        E = R[:, a:]
        S = np.zeros((a, a), dtype=np.int64)
        S[:k] = R[:k, :a]
        free = [c for c in range(a) if c not in set(pivots)]
        for row, c in enumerate(free, start=k):
            S[row, c] = 1
        T = sub.inverse(E) if b else E
        return T, k, S


# ---- modules --------------------------------------------------------------------------


class CatModule:
    """A functor from the truncated category to k-vector spaces."""

    label = ""

    def __init__(self, cat: TruncCat) -> None:
        self.cat = cat
        self.field = cat.field

    def dim(self, m: int) -> int:
        raise NotImplementedError

    def dims(self) -> Tuple[int, ...]:
        return tuple(self.dim(m) for m in self.cat.objects)

    def action(self, h: np.ndarray) -> np.ndarray:
        """M(h) for h: F_q^a -> F_q^b, a (dim M(b) x dim M(a)) matrix over k."""
        raise NotImplementedError

    def apply_to(self, h: np.ndarray, V: np.ndarray) -> np.ndarray:
        return self.field.matmul(self.action(h), V)

    def columns(self, j: int, m: int, v: np.ndarray) -> np.ndarray:
        """The Yoneda map P^j -> M sending id_j to v, at object m (dim M(m) x q^(jm))."""
        mats = self.cat.morphisms(j, m)
        v = np.asarray(v, dtype=np.int64)
        if not mats.shape[0]:
            return np.zeros((self.dim(m), 0), dtype=np.int64)
        return np.stack([self.apply_to(g, v) for g in mats], axis=1)

    def certify_functoriality(self, samples: int = 50, rng: Optional[np.random.Generator] = None) -> bool:
        """Identities, generators composed with random maps, random composable pairs and factorizations act correctly."""
        rng = rng or np.random.default_rng(0)
        cat, f = self.cat, self.field
        for m in cat.objects:
            if not np.array_equal(self.action(np.eye(m, dtype=np.int64)), np.eye(self.dim(m), dtype=np.int64)):
                return False

        def composes(h: np.ndarray, g: np.ndarray) -> bool:
            return np.array_equal(self.action(cat.compose(h, g)), f.matmul(self.action(h), self.action(g)))

        for family in cat.generators().values():
            for g in family:
                c = int(rng.integers(0, cat.N + 1))
                if not composes(cat.sub.random((c, g.shape[0]), rng), g):
                    return False
        for _ in range(samples):
            a, b, c = (int(x) for x in rng.integers(0, cat.N + 1, size=3))
            g = cat.sub.random((b, a), rng)
            if not composes(cat.sub.random((c, b), rng), g):
                return False
            T, k, S = cat.factor(g)
            through = f.matmul(
                f.matmul(self.action(T), self.action(cat.inclusion(k, b))),
                f.matmul(self.action(cat.projection(a, k)), self.action(S)),
            )
            if not np.array_equal(self.action(g), through):
                return False
        return True


class RestrictedModule(CatModule):
    """t*E: the strict polynomial functor E seen on F_q-vector spaces, with values over k."""

    def __init__(self, expr: FunctorExpr, cat: TruncCat) -> None:
        super().__init__(cat)
        if expr.is_contravariant():
            raise ExpressionError(f"{expr.text()} is contravariant; restrict its covariant dual")
        self.expr = expr
        self.label = f"t*{expr.text()}"
        self._dims = [dimension(expr, m, self.field.p) for m in cat.objects]
        self._actions: Dict[Tuple[int, int, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def dim(self, m: int) -> int:
        return self._dims[m]

    def action(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=np.int64)
        b, a = h.shape
        key = (a, b, int(self.cat.encode(h)))
        if not self.dim(a) or not self.dim(b):
            return np.zeros((self.dim(b), self.dim(a)), dtype=np.int64)
        hit = self._actions.get(key)
        if hit is None:
            hit = apply(self.expr, self.cat.lift(h), self.field)
            with self._lock:
                self._actions.setdefault(key, hit)
        return hit


class ProjectiveSum(CatModule):
    """sum_k P^{j_k}, P^j = k[Hom(F_q^j, -)]; at object m the summands' bases are concatenated."""

    def __init__(self, cat: TruncCat, js: Sequence[int]) -> None:
        super().__init__(cat)
        self.js = [int(j) for j in js]
        if any(j < 0 or j > cat.N for j in self.js):
            raise ShapeError(f"projective index out of range 0..{cat.N}", js=self.js)
        self.label = "+".join(f"P{j}" for j in self.js) or "0"
        self._offsets = {}
        for m in cat.objects:
            sizes = [cat.count(j, m) for j in self.js]
            self._offsets[m] = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    def dim(self, m: int) -> int:
        return int(self._offsets[m][-1])

    def slice(self, k: int, m: int) -> slice:
        off = self._offsets[m]
        return slice(int(off[k]), int(off[k + 1]))

    def action(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=np.int64)
        b, a = h.shape
        out = np.zeros((self.dim(b), self.dim(a)), dtype=np.int64)
        for k, j in enumerate(self.js):
            src = self.slice(k, a)
            dst = self.slice(k, b)
            targets = self.cat.post_indices(h, j)
            out[dst.start + targets, np.arange(src.start, src.stop)] = 1
        return out

    def apply_to(self, h: np.ndarray, V: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=np.int64)
        V = np.asarray(V, dtype=np.int64)
        b, a = h.shape
        vector = V.ndim == 1
        if vector:
            V = V[:, None]
        out = np.zeros((self.dim(b), V.shape[1]), dtype=np.int64)
        for k, j in enumerate(self.js):
            src = self.slice(k, a)
            targets = self.cat.post_indices(h, j) + self.slice(k, b).start
            self.field.scatter_add(out, targets, V[src])
        return out[:, 0] if vector else out

    def columns(self, j: int, m: int, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.int64)
        count = self.cat.count(j, m)
        out = np.zeros(self.dim(m) * count, dtype=np.int64)
        cols = np.arange(count, dtype=np.int64)
        for k, jk in enumerate(self.js):
            part = v[self.slice(k, j)]
            nz = np.flatnonzero(part)
            if not nz.size:
                continue
            base = self.slice(k, m).start
            us = self.cat.morphisms(jk, j)[nz]
            for u, c in zip(us, part[nz]):
                rows = base + self.cat.pre_indices(u, m)
                self.field.scatter_add(out, rows * count + cols, np.full(count, c, dtype=np.int64))
        return out.reshape(self.dim(m), count)


def build_proj(cat: TruncCat, j: int) -> ProjectiveSum:
    """The standard projective P^j."""
    return ProjectiveSum(cat, [j])


def restrict_functor(E: FunctorExpr, cat: TruncCat, base: Optional[FieldSpec] = None) -> RestrictedModule:
    if base is not None and base != cat.field:
        cat = TruncCat(cat.q, cat.N, base)
    return RestrictedModule(E, cat)


# ---- resolutions and Ext -------------------------------------------------------------------


@dataclass
class CatStep:
    projective: ProjectiveSum
    generators: List[Tuple[int, np.ndarray]]
    differential: Dict[int, np.ndarray]
    certificate: Dict[int, Tuple[int, int]] = dc_field(default_factory=dict)
    kernel: Dict[int, np.ndarray] = dc_field(default_factory=dict)


@dataclass
class CatResolution:
    target: CatModule
    steps: List[CatStep]

    @property
    def length(self) -> int:
        return len(self.steps) - 1

    def module(self, i: int) -> ProjectiveSum:
        return self.steps[i].projective

    def codomain(self, i: int) -> CatModule:
        return self.target if i == 0 else self.module(i - 1)


def cat_resolve(M: CatModule, length: int, *, block_cap: Optional[int] = None) -> CatResolution:
    """A resolution of M by sums of standard projectives, exact at every object."""
    cat, f = M.cat, M.field
    cap = settings.block_cap if block_cap is None else block_cap
    ambient: CatModule = M
    K = {m: np.eye(M.dim(m), dtype=np.int64) for m in cat.objects}
    steps: List[CatStep] = []
    for i in range(length + 1):
        gens: List[Tuple[int, np.ndarray]] = []
        cols: List[Dict[int, np.ndarray]] = []

        def column_block(g: int, m: int) -> np.ndarray:
            hit = cols[g].get(m)
            if hit is None:
                j, v = gens[g]
                hit = ambient.columns(j, m, v)
                cols[g][m] = hit
            return hit

        for m in cat.objects:
            need = K[m].shape[1]
            if need == 0:
                continue
            span = EchelonBasis(f, ambient.dim(m))
            for g in range(len(gens)):
                span.extend(column_block(g, m).T)
            cand = K[m].T
            while span.rank < need:
                residual = span.reduce(cand)
                row = int(np.flatnonzero(residual.any(axis=1))[0])
                gens.append((m, cand[row]))
                cols.append({})
                span.extend(column_block(len(gens) - 1, m).T)
        P = ProjectiveSum(cat, [j for j, _ in gens])
        differential: Dict[int, np.ndarray] = {}
        certificate: Dict[int, Tuple[int, int]] = {}
        kernel: Dict[int, np.ndarray] = {}
        for m in cat.objects:
            if P.dim(m) > cap:
                raise ResourceCapError(
                    f"object {m} of step {i} has {P.dim(m)} columns (cap {cap})",
                    block=f"P({m})",
                    size=P.dim(m),
                    step=i,
                )
            if gens:
                d = np.hstack([column_block(g, m) for g in range(len(gens))])
            else:
                d = np.zeros((ambient.dim(m), 0), dtype=np.int64)
            rank = f.rank(d) if d.size else 0
            certificate[m] = (rank, K[m].shape[1])
            if rank != K[m].shape[1]:
                raise SpfhError(f"cover at step {i} is not onto the kernel at object {m}", rank=rank)
            differential[m] = d
            kernel[m] = f.kernel(d) if d.shape[1] else np.zeros((0, 0), dtype=np.int64)
        if steps:
            prev = steps[-1].differential
            for m in cat.objects:
                if prev[m].size and differential[m].size and f.matmul(prev[m], differential[m]).any():
                    raise SpfhError(f"differentials do not compose to zero at object {m}, step {i}")
        steps.append(CatStep(P, gens, differential, certificate, kernel))
        log.debug("cat resolution step %d: generators at %s, dims %s", i, P.js, P.dims())
        ambient = P
        K = kernel
    log.info("resolved %s over %r to length %d", M.label, cat, length)
    return CatResolution(M, steps)


def cat_pullback(vectors: Sequence[Tuple[int, np.ndarray]], P: ProjectiveSum, N: CatModule) -> np.ndarray:
    """Rows: c(w_l) in N(j_l) for each (j_l, w_l) with w_l in P(j_l); cols: Hom(P, N) = sum_k N(j_k).

    Block (l, k) is sum_u w_l[k, u] N(u) over u: F_q^{j_k} -> F_q^{j_l}.
    """
    f = N.field
    cat = P.cat
    col_sizes = [N.dim(j) for j in P.js]
    col_off = np.concatenate([[0], np.cumsum(col_sizes)]).astype(np.int64)
    rows = []
    for j, w in vectors:
        out = np.zeros((N.dim(j), int(col_off[-1])), dtype=np.int64)
        for k, jk in enumerate(P.js):
            if not col_sizes[k] or not out.shape[0]:
                continue
            part = np.asarray(w[P.slice(k, j)], dtype=np.int64)
            nz = np.flatnonzero(part)
            if not nz.size:
                continue
            acc = np.zeros((N.dim(j), col_sizes[k]), dtype=np.int64)
            for u, c in zip(cat.morphisms(jk, j)[nz], part[nz]):
                acc = f.add(acc, f.mul(int(c), N.action(u)))
            out[:, col_off[k] : col_off[k + 1]] = acc
        rows.append(out)
    if not rows:
        return np.zeros((0, int(col_off[-1])), dtype=np.int64)
    return np.vstack(rows)


class CatExtComplex(CochainComplex):
    """Hom(Q_*, N) for a projective resolution Q_* in the truncated category."""

    def __init__(self, resolution: CatResolution, N: CatModule) -> None:
        self.resolution = resolution
        self.N = N
        super().__init__(N.field, resolution.length)

    def cochain_dim(self, i: int) -> int:
        if i < 0 or i > self.resolution.length:
            return 0
        return sum(self.N.dim(j) for j in self.resolution.steps[i].projective.js)

    def _coboundary(self, i: int) -> np.ndarray:
        step = self.resolution.steps[i]
        return cat_pullback(step.generators, self.resolution.steps[i - 1].projective, self.N)


def cat_ext(
    M: CatModule,
    N: CatModule,
    max_degree: int,
    *,
    resolution: Optional[CatResolution] = None,
) -> GradedDims:
    """dim Ext^i(M, N) in the truncated category for i = 0..max_degree."""
    if M.cat is not N.cat and (M.cat.q, M.cat.N, M.field) != (N.cat.q, N.cat.N, N.field):
        raise ShapeError("cat_ext needs modules over the same truncated category")
    res = resolution if resolution is not None else cat_resolve(M, max_degree + 1)
    cx = CatExtComplex(res, N)
    dims = cx.dims(max_degree)
    return GradedDims(dims, {"kind": "truncation", "q": M.cat.q, "N": M.cat.N, "length": res.length})


def cat_ext_expr(F: FunctorExpr, G: FunctorExpr, cat: TruncCat, max_degree: int) -> GradedDims:
    return cat_ext(restrict_functor(F, cat), restrict_functor(G, cat), max_degree)


def cat_tor(E: FunctorExpr, F: FunctorExpr, cat: TruncCat, max_degree: int) -> GradedDims:
    """Tor_i(t*E, t*F) for contravariant E = cdual(X), as Ext_i(t*F, t*kuhn(X))."""
    X = covariant_dual(E)
    out = cat_ext_expr(F, X, cat, max_degree)
    out.certificate["duality"] = X.text()
    return out


@dataclass
class StabilizationReport:
    q: int
    truncations: List[int]
    table: Dict[int, Tuple[int, ...]]
    stable: List[bool]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "truncations": list(self.truncations),
            "table": {str(N): list(d) for N, d in self.table.items()},
            "stable": list(self.stable),
        }


def stabilization_scan(
    F: FunctorExpr,
    G: FunctorExpr,
    q: int,
    max_degree: int,
    truncations: Sequence[int],
    field: Optional[FieldSpec] = None,
) -> StabilizationReport:
    """cat_ext(t*F, t*G) across truncations; a degree is stable when the last two agree."""
    Ns = sorted(int(N) for N in truncations)
    table: Dict[int, Tuple[int, ...]] = {}
    for N in Ns:
        cat = TruncCat(q, N, field)
        table[N] = cat_ext_expr(F, G, cat, max_degree).dims
    if len(Ns) >= 2:
        last, prev = table[Ns[-1]], table[Ns[-2]]
        stable = [a == b for a, b in zip(last, prev)]
    else:
        stable = [False] * (max_degree + 1)
    log.info("stabilization %s vs %s at q=%d: %s", F.text(), G.text(), q, table)
    return StabilizationReport(q, Ns, table, stable)
