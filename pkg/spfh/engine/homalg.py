"""Homs, Yoneda covers, resolutions by divided-power projectives, Ext and Tor.

Hom(Gamma^lam, N) is the weight space N_lam: a weight vector v in N_lam
determines the module map sending the cyclic generator gamma_lam to v. Those
maps are computed by spinning gamma_lam through the operators once (a spin
tree per lam) and replaying the same operator words on v.

Everything is stored weight block by weight block.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Tuple
import itertools
import logging
import threading

import numpy as np

from spfh.app.config import settings
from spfh.engine.errors import ResourceCapError, ShapeError, SpfhError
from spfh.engine.expr import FunctorExpr, Twist, covariant_dual, gamma, ten
from spfh.engine.field import EchelonBasis, FieldSpec
from spfh.engine.polyfun import (
    ModuleMap,
    OpKey,
    Weight,
    WeightedModule,
    act,
    compositions,
    composition_index,
    evaluate,
)

log = logging.getLogger(__name__)

POLICIES = ("dominance", "reverse")


@dataclass
class GradedDims:
    dims: Tuple[int, ...]
    certificate: Dict[str, Any] = dc_field(default_factory=dict)

    def __getitem__(self, i: int) -> int:
        return self.dims[i]

    def __len__(self) -> int:
        return len(self.dims)

    def as_tuple(self) -> Tuple[int, ...]:
        return tuple(self.dims)


# ---- hom spaces ----------------------------------------------------------------------


def hom_space(M: WeightedModule, N: WeightedModule) -> List[ModuleMap]:
    """A basis of the module maps M -> N (certified)."""
    if M.n != N.n or M.field != N.field:
        raise ShapeError("hom_space needs modules over the same rank and field")
    f = M.field
    weights = [mu for mu in M.weight_list() if N.block_dim(mu)]
    if not weights:
        return []
    # unknowns: X_mu (|N_mu| x |M_mu|) flattened row-major, concatenated over weights
    offsets: Dict[Weight, int] = {}
    total = 0
    for mu in weights:
        offsets[mu] = total
        total += N.block_dim(mu) * M.block_dim(mu)
    K = np.eye(total, dtype=np.int64)
    keys = sorted(set(M.op_keys()) | set(N.op_keys()))
    for key in keys:
        for mu in M.weight_list():
            target, Mop = M.op_block(key, mu)
            if target is None:
                continue
            _, Nop = N.op_block(key, mu)
            nm, nt = N.block_dim(mu), N.block_dim(target)
            mm, mt = M.block_dim(mu), M.block_dim(target)
            if nt == 0 or mm == 0:
                continue
            # N_op X_mu - X_target M_op = 0, an (nt x mm) system
            C = np.zeros((nt * mm, total), dtype=np.int64)
            if mu in offsets and nm:
                C[:, offsets[mu] : offsets[mu] + nm * mm] = np.kron(Nop, np.eye(mm, dtype=np.int64))
            if target in offsets and mt:
                C[:, offsets[target] : offsets[target] + nt * mt] = f.sub(
                    C[:, offsets[target] : offsets[target] + nt * mt],
                    np.kron(np.eye(nt, dtype=np.int64), Mop.T),
                )
            if not C.any():
                continue
            CK = f.matmul(C, K)
            if not CK.any():
                continue
            K = f.matmul(K, f.kernel(CK))
            if K.shape[1] == 0:
                return []
    out = []
    for col in range(K.shape[1]):
        X = np.zeros((N.dim, M.dim), dtype=np.int64)
        for mu in weights:
            nm, mm = N.block_dim(mu), M.block_dim(mu)
            blk = K[offsets[mu] : offsets[mu] + nm * mm, col].reshape(nm, mm)
            X[np.ix_(N.block(mu), M.block(mu))] = blk
        m = ModuleMap(M, N, X, name="hom")
        if not m.certify():
            raise SpfhError("hom_space produced a non-natural map")
        out.append(m)
    return out


# ---- spin trees and Yoneda maps ----------------------------------------------------------


def gamma_index(lam: Sequence[int], n: int) -> int:
    """Index of the cyclic generator gamma_lam in the basis of gamma(lam) evaluated at rank n."""
    parts = [int(x) for x in lam if x > 0]
    if not parts:
        return 0
    index = 0
    for i, d in enumerate(x for x in lam):
        if d <= 0:
            continue
        comp = [0] * n
        comp[i] = int(d)
        size = len(compositions(int(d), n))
        index = index * size + composition_index(int(d), n)[tuple(comp)]
    return index


@dataclass
class SpinTree:
    lam: Weight
    module: WeightedModule
    nodes: List[Tuple[int, Optional[OpKey], Weight]]
    by_weight: Dict[Weight, List[int]]
    binv: Dict[Weight, np.ndarray]


_SPIN: Dict[Tuple[Weight, int, FieldSpec], SpinTree] = {}
_SPIN_LOCK = threading.Lock()


def spin_tree(lam: Sequence[int], n: int, field: FieldSpec) -> SpinTree:
    lam = tuple(int(x) for x in lam)
    key = (lam, n, field)
    hit = _SPIN.get(key)
    if hit is not None:
        return hit
    f = field
    G = evaluate(gamma(lam), n, f)
    root_global = gamma_index(lam, n)
    root_local = int(np.searchsorted(G.block(lam), root_global))
    vec0 = np.zeros(G.block_dim(lam), dtype=np.int64)
    vec0[root_local] = 1
    nodes: List[Tuple[int, Optional[OpKey], Weight]] = [(-1, None, lam)]
    vectors: List[np.ndarray] = [vec0]
    spans: Dict[Weight, EchelonBasis] = {lam: EchelonBasis(f, G.block_dim(lam))}
    spans[lam].extend(vec0[None, :])
    found = 1
    keys = G.op_keys()
    queue = deque([0])
    while queue and found < G.dim:
        k = queue.popleft()
        mu = nodes[k][2]
        for op in keys:
            target, blk = G.op_block(op, mu)
            if target is None or blk.shape[0] == 0:
                continue
            w = f.matmul(blk, vectors[k])
            if not w.any():
                continue
            span = spans.setdefault(target, EchelonBasis(f, G.block_dim(target)))
            if span.rank == span.dim or not span.extend(w[None, :]).size:
                continue
            nodes.append((k, op, target))
            vectors.append(w)
            queue.append(len(nodes) - 1)
            found += 1
    if found != G.dim:
        raise SpfhError(f"gamma{lam} is not cyclic on its generator (found {found} of {G.dim})")
    by_weight: Dict[Weight, List[int]] = {}
    for idx, (_, _, mu) in enumerate(nodes):
        by_weight.setdefault(mu, []).append(idx)
    binv = {}
    for mu, ids in by_weight.items():
        B = np.stack([vectors[i] for i in ids], axis=1)
        binv[mu] = f.inverse(B)
    tree = SpinTree(lam, G, nodes, by_weight, binv)
    with _SPIN_LOCK:
        _SPIN.setdefault(key, tree)
    return _SPIN[key]


def yoneda_blocks(tree: SpinTree, W: WeightedModule, V: np.ndarray) -> Dict[Weight, np.ndarray]:
    """Images of the Gamma^lam basis under the maps gamma -> V[:, c].

    Returns mu -> array (|Gamma_mu|, |W_mu|, c): entry [b] is the image of basis vector b
    of the weight-mu block, for every column of V at once.
    """
    f = W.field
    V = np.asarray(V, dtype=np.int64)
    c = V.shape[1]
    U: List[np.ndarray] = [V]
    for k in range(1, len(tree.nodes)):
        parent, op, _ = tree.nodes[k]
        _, blk = W.op_block(op, tree.nodes[parent][2])
        U.append(f.matmul(blk, U[parent]))
    out: Dict[Weight, np.ndarray] = {}
    for mu, ids in tree.by_weight.items():
        size = W.block_dim(mu)
        S = np.stack([U[k] for k in ids]).reshape(len(ids), size * c)
        out[mu] = f.matmul(tree.binv[mu].T, S).reshape(len(ids), size, c)
    return out


def yoneda_map(W: WeightedModule, lam: Sequence[int], v: np.ndarray) -> Dict[Weight, np.ndarray]:
    """The module map Gamma^lam -> W with gamma -> v, as blocks mu -> (|W_mu| x |Gamma_mu|)."""
    tree = spin_tree(lam, W.n, W.field)
    Y = yoneda_blocks(tree, W, np.asarray(v, dtype=np.int64)[:, None])
    return {mu: np.ascontiguousarray(y[:, :, 0].T) for mu, y in Y.items()}


class YonedaTables:
    """Per-lam tables Y[mu][b] (|N_mu| x |N_lam|) of a fixed target module N."""

    def __init__(self, N: WeightedModule) -> None:
        self.N = N
        self._tables: Dict[Weight, Dict[Weight, np.ndarray]] = {}
        self._lock = threading.Lock()

    def __call__(self, lam: Weight) -> Dict[Weight, np.ndarray]:
        lam = tuple(lam)
        hit = self._tables.get(lam)
        if hit is None:
            width = self.N.block_dim(lam)
            if width == 0:
                hit = {}
            else:
                tree = spin_tree(lam, self.N.n, self.N.field)
                hit = yoneda_blocks(tree, self.N, np.eye(width, dtype=np.int64))
            with self._lock:
                self._tables.setdefault(lam, hit)
        return self._tables[lam]


# ---- projective sums and resolutions -------------------------------------------------------


class GammaSum:
    """P = sum_j Gamma^{lam_j} at rank n; block mu concatenates the summands' mu blocks in order."""

    def __init__(self, lambdas: Sequence[Weight], n: int, field: FieldSpec, twist: int = 0) -> None:
        self.lambdas = [tuple(l) for l in lambdas]
        self.n = n
        self.field = field
        self.twist = twist
        summands = [evaluate(_gamma_expr(l, twist), n, field) for l in self.lambdas]
        self.summands = summands
        self.module = WeightedModule.direct_sum(summands, n, field, label=f"P{len(self.lambdas)}")
        self._slices: Dict[Weight, List[Tuple[int, int, int]]] = {}

    def slices(self, mu: Sequence[int]) -> List[Tuple[int, int, int]]:
        """(summand j, start, stop) positions of each summand inside block mu."""
        mu = tuple(mu)
        hit = self._slices.get(mu)
        if hit is None:
            hit = []
            pos = 0
            for j, S in enumerate(self.summands):
                size = S.block_dim(mu)
                if size:
                    hit.append((j, pos, pos + size))
                pos += size
            self._slices[mu] = hit
        return hit


def _gamma_expr(lam: Weight, twist: int) -> FunctorExpr:
    e = gamma(lam)
    return Twist(e, twist) if twist else e


@dataclass
class ResolutionStep:
    projective: GammaSum
    generators: List[np.ndarray]
    differential: Dict[Weight, np.ndarray]
    certificate: Dict[Weight, Tuple[int, int]] = dc_field(default_factory=dict)
    kernel: Optional[Dict[Weight, np.ndarray]] = None

    @property
    def lambdas(self) -> List[Weight]:
        return self.projective.lambdas


class ExactComplex(Protocol):
    target: WeightedModule

    def module(self, i: int) -> WeightedModule: ...

    def block(self, i: int, mu: Weight) -> np.ndarray: ...


@dataclass
class Resolution:
    target: WeightedModule
    steps: List[ResolutionStep]
    policy: str = "dominance"

    @property
    def length(self) -> int:
        return len(self.steps) - 1

    def module(self, i: int) -> WeightedModule:
        return self.steps[i].projective.module

    def codomain(self, i: int) -> WeightedModule:
        return self.target if i == 0 else self.module(i - 1)

    def block(self, i: int, mu: Weight) -> np.ndarray:
        mu = tuple(mu)
        blk = self.steps[i].differential.get(mu)
        if blk is None:
            return np.zeros((self.codomain(i).block_dim(mu), self.module(i).block_dim(mu)), dtype=np.int64)
        return blk

    def full_matrix(self, i: int) -> np.ndarray:
        """The dense differential d_i (augmentation for i = 0)."""
        src, dst = self.module(i), self.codomain(i)
        out = np.zeros((dst.dim, src.dim), dtype=np.int64)
        for mu, blk in self.steps[i].differential.items():
            if blk.size:
                out[np.ix_(dst.block(mu), src.block(mu))] = blk
        return out

    def check_complex(self) -> bool:
        f = self.target.field
        for i in range(1, len(self.steps)):
            for mu, blk in self.steps[i].differential.items():
                prev = self.block(i - 1, mu)
                if prev.size and blk.size and f.matmul(prev, blk).any():
                    return False
        return True

    def summary(self) -> List[Dict[str, Any]]:
        return [
            {"step": i, "generators": len(s.lambdas), "dim": s.projective.module.dim}
            for i, s in enumerate(self.steps)
        ]


def _weight_order(weights, policy: str) -> List[Weight]:
    if policy not in POLICIES:
        raise ShapeError(f"unknown cover policy {policy!r}", known=list(POLICIES))
    return sorted(weights, reverse=(policy == "dominance"))


def _cover(
    ambient: WeightedModule,
    K: Dict[Weight, np.ndarray],
    policy: str,
) -> Tuple[List[Weight], List[np.ndarray], List[Dict[Weight, np.ndarray]]]:
    """Greedy generators of the submodule with weight blocks K[mu] (basis columns)."""
    f = ambient.field
    spans: Dict[Weight, EchelonBasis] = {}
    lambdas: List[Weight] = []
    gens: List[np.ndarray] = []
    maps: List[Dict[Weight, np.ndarray]] = []
    for mu in _weight_order([m for m, k in K.items() if k.shape[1]], policy):
        need = K[mu].shape[1]
        span = spans.setdefault(mu, EchelonBasis(f, ambient.block_dim(mu)))
        cand = K[mu].T if policy == "dominance" else K[mu].T[::-1]
        while span.rank < need:
            residual = span.reduce(cand)
            row = int(np.flatnonzero(residual.any(axis=1))[0])
            v = cand[row]
            phi = yoneda_map(ambient, mu, v)
            for nu, blk in phi.items():
                if blk.size:
                    spans.setdefault(nu, EchelonBasis(f, ambient.block_dim(nu))).extend(blk.T)
            lambdas.append(mu)
            gens.append(v)
            maps.append(phi)
    return lambdas, gens, maps


def yoneda_cover(M: WeightedModule, policy: str = "dominance") -> Tuple[GammaSum, ModuleMap]:
    """A surjection from a sum of Gamma^lam onto M."""
    K = {mu: np.eye(M.block_dim(mu), dtype=np.int64) for mu in M.blocks}
    lambdas, gens, maps = _cover(M, K, policy)
    P = GammaSum(lambdas, M.n, M.field)
    X = np.zeros((M.dim, P.module.dim), dtype=np.int64)
    for mu in P.module.blocks:
        blk = _assemble(M, maps, mu)
        X[np.ix_(M.block(mu), P.module.block(mu))] = blk
    return P, ModuleMap(P.module, M, X, name="cover")


def _assemble(ambient: WeightedModule, maps: List[Dict[Weight, np.ndarray]], mu: Weight) -> np.ndarray:
    rows = ambient.block_dim(mu)
    cols = [maps[j].get(mu, np.zeros((rows, 0), dtype=np.int64)) for j in range(len(maps))]
    if not cols:
        return np.zeros((rows, 0), dtype=np.int64)
    return np.hstack(cols)


def resolve(
    M: WeightedModule,
    length: int,
    *,
    policy: str = "dominance",
    block_cap: Optional[int] = None,
) -> Resolution:
    """P_length -> ... -> P_0 -> M with exactness certified per weight block."""
    if length < 0:
        raise ShapeError("resolution length must be >= 0")
    f = M.field
    cap = settings.block_cap if block_cap is None else block_cap
    ambient = M
    K = {mu: np.eye(M.block_dim(mu), dtype=np.int64) for mu in M.blocks}
    steps: List[ResolutionStep] = []
    for i in range(length + 1):
        lambdas, gens, maps = _cover(ambient, K, policy)
        P = GammaSum(lambdas, M.n, f)
        for mu, idx in P.module.blocks.items():
            if idx.size > cap:
                raise ResourceCapError(
                    f"weight block {mu} of step {i} has {idx.size} columns (cap {cap})",
                    block=str(mu),
                    size=int(idx.size),
                    step=i,
                )
        differential: Dict[Weight, np.ndarray] = {}
        certificate: Dict[Weight, Tuple[int, int]] = {}
        kernel: Dict[Weight, np.ndarray] = {}
        for mu in set(P.module.blocks) | set(K):
            blk = _assemble(ambient, maps, mu)
            differential[mu] = blk
            need = K[mu].shape[1] if mu in K else 0
            rank = f.rank(blk) if blk.size else 0
            certificate[mu] = (rank, need)
            if rank != need:
                raise SpfhError(f"cover at step {i} is not onto the kernel in weight {mu}", rank=rank, need=need)
            if blk.shape[1]:
                kernel[mu] = f.kernel(blk)
        steps.append(ResolutionStep(P, gens, differential, certificate, kernel))
        log.debug("resolution step %d: %d generators, dim %d", i, len(lambdas), P.module.dim)
        ambient = P.module
        K = kernel
    res = Resolution(M, steps, policy)
    if not res.check_complex():
        raise SpfhError("resolution differentials do not compose to zero")
    log.info(
        "resolved %s at n=%d to length %d: dims %s",
        M.label,
        M.n,
        length,
        [s.projective.module.dim for s in steps],
    )
    return res


# ---- Ext ---------------------------------------------------------------------------------


def pullback_matrix(
    vectors: Sequence[Tuple[Weight, np.ndarray]],
    P: GammaSum,
    ytab: YonedaTables,
    weight_map: Optional[Callable[[Weight], Optional[Weight]]] = None,
) -> np.ndarray:
    """Rows: for each (mu_j, w_j), the values c(w_j) in N_{mu_j}; cols: Hom(P, N) = sum_k N_{lam_k}.

    w_j lies in block weight_map(mu_j) of P; entry (j, k) is sum_b w_{j,k}[b] Y^{lam_k}[b].
    """
    N = ytab.N
    f = N.field
    col_sizes = [N.block_dim(lam) for lam in P.lambdas]
    col_off = np.concatenate([[0], np.cumsum(col_sizes)]).astype(np.int64)
    blocks_rows = []
    for mu, w in vectors:
        nu = weight_map(mu) if weight_map else mu
        rows = N.block_dim(nu) if nu is not None else 0
        out = np.zeros((rows, int(col_off[-1])), dtype=np.int64)
        if rows and nu is not None:
            for k, a, b in P.slices(nu):
                x = np.asarray(w[a:b], dtype=np.int64)
                if not x.any() or not col_sizes[k]:
                    continue
                Y = ytab(P.lambdas[k])[nu]
                contrib = f.matmul(x[None, :], Y.reshape(Y.shape[0], -1)).reshape(rows, col_sizes[k])
                out[:, col_off[k] : col_off[k + 1]] = f.add(out[:, col_off[k] : col_off[k + 1]], contrib)
        blocks_rows.append(out)
    if not blocks_rows:
        return np.zeros((0, int(col_off[-1])), dtype=np.int64)
    return np.vstack(blocks_rows)


class CochainComplex:
    """A finite cochain complex given by its coboundaries delta(i): C^{i-1} -> C^i."""

    def __init__(self, field: FieldSpec, length: int) -> None:
        self.field = field
        self.length = length
        self._deltas: Dict[int, np.ndarray] = {}

    def cochain_dim(self, i: int) -> int:
        raise NotImplementedError

    def _coboundary(self, i: int) -> np.ndarray:
        raise NotImplementedError

    def delta(self, i: int) -> np.ndarray:
        """delta^i: C^{i-1} -> C^i (zero for i = 0)."""
        hit = self._deltas.get(i)
        if hit is not None:
            return hit
        if i <= 0:
            out = np.zeros((self.cochain_dim(0), 0), dtype=np.int64)
        elif i > self.length:
            out = np.zeros((0, self.cochain_dim(i - 1)), dtype=np.int64)
        else:
            out = self._coboundary(i)
        self._deltas[i] = out
        return out

    def dim(self, i: int) -> int:
        if i + 1 > self.length:
            raise ShapeError(f"resolution too short for degree {i}")
        f = self.field
        d_next = self.delta(i + 1)
        d_here = self.delta(i)
        r_next = f.rank(d_next) if d_next.size else 0
        r_here = f.rank(d_here) if d_here.size else 0
        return self.cochain_dim(i) - r_next - r_here

    def dims(self, max_degree: int) -> Tuple[int, ...]:
        return tuple(self.dim(i) for i in range(max_degree + 1))

    def cocycles(self, i: int) -> np.ndarray:
        d_next = self.delta(i + 1)
        if d_next.shape[0] == 0:
            return np.eye(self.cochain_dim(i), dtype=np.int64)
        return self.field.kernel(d_next)

    def coboundaries(self, i: int) -> np.ndarray:
        return self.delta(i)

    def representatives(self, i: int) -> np.ndarray:
        """Cocycles completing the coboundaries to a basis of the cocycle space, as columns."""
        f = self.field
        Z = self.cocycles(i)
        B = self.coboundaries(i)
        span = EchelonBasis(f, self.cochain_dim(i))
        if B.size:
            span.extend(B.T)
        picked = span.extend(Z.T) if Z.size else np.zeros(0, dtype=np.int64)
        return Z[:, picked]


class ExtComplex(CochainComplex):
    """The cochain complex Hom(P_*, N) in Yoneda coordinates."""

    def __init__(self, resolution: Resolution, N: WeightedModule) -> None:
        self.resolution = resolution
        self.N = N
        self.ytab = YonedaTables(N)
        super().__init__(N.field, resolution.length)

    def cochain_dim(self, i: int) -> int:
        if i < 0 or i > self.resolution.length:
            return 0
        return sum(self.N.block_dim(lam) for lam in self.resolution.steps[i].lambdas)

    def _coboundary(self, i: int) -> np.ndarray:
        step = self.resolution.steps[i]
        vectors = list(zip(step.lambdas, step.generators))
        return pullback_matrix(vectors, self.resolution.steps[i - 1].projective, self.ytab)


def ext_complex(M: WeightedModule, N: WeightedModule, max_degree: int, *, policy: str = "dominance",
                resolution: Optional[Resolution] = None) -> ExtComplex:
    res = resolution if resolution is not None else resolve(M, max_degree + 1, policy=policy)
    return ExtComplex(res, N)


def homogeneous_part(M: WeightedModule, D: int) -> WeightedModule:
    return M if M.degrees == [D] else M.component(D)


def ext(
    M: WeightedModule,
    N: WeightedModule,
    max_degree: int,
    *,
    policy: str = "dominance",
    cocycles: bool = False,
    resolution: Optional[Resolution] = None,
) -> GradedDims:
    """dim Ext^i(M, N) for i = 0..max_degree."""
    if M.n != N.n or M.field != N.field:
        raise ShapeError("ext needs modules over the same rank and field")
    if resolution is not None:
        if len(M.degrees) > 1:
            raise ShapeError("a supplied resolution must be of a homogeneous module")
        parts = [(D, M, homogeneous_part(N, D), resolution) for D in M.degrees]
    else:
        common = sorted(set(M.degrees) & set(N.degrees))
        parts = [(D, homogeneous_part(M, D), homogeneous_part(N, D), None) for D in common]
    dims = [0] * (max_degree + 1)
    reps: Dict[int, Dict[int, np.ndarray]] = {}
    for D, Mc, Nc, res in parts:
        if Mc.dim == 0 or Nc.dim == 0:
            continue
        cx = ext_complex(Mc, Nc, max_degree, policy=policy, resolution=res)
        for i in range(max_degree + 1):
            dims[i] += cx.dim(i)
            if cocycles:
                reps.setdefault(D, {})[i] = cx.representatives(i)
    cert: Dict[str, Any] = {"kind": "exact", "length": max_degree + 1, "n": M.n, "faithful": M.faithful and N.faithful}
    if cocycles:
        cert["cocycles"] = reps
    return GradedDims(tuple(dims), cert)


def ext_expr(F: FunctorExpr, G: FunctorExpr, n: int, field: FieldSpec, max_degree: int, **kwargs) -> GradedDims:
    return ext(evaluate(F, n, field), evaluate(G, n, field), max_degree, **kwargs)


def tor(E: FunctorExpr, F: FunctorExpr, max_degree: int, n: int, field: FieldSpec, **kwargs) -> GradedDims:
    """Tor_i(E, F) for contravariant E, through Tor_i(cdual(X), F) = Ext_i(F, kuhn(X))."""
    X = covariant_dual(E)
    out = ext(evaluate(F, n, field), evaluate(X, n, field), max_degree, **kwargs)
    out.certificate["duality"] = X.text()
    return out


# ---- chain maps ---------------------------------------------------------------------------


@dataclass
class ChainMap:
    source: Resolution
    target: Any
    images: List[List[np.ndarray]]

    def vectors(self, i: int) -> List[Tuple[Weight, np.ndarray]]:
        return list(zip(self.source.steps[i].lambdas, self.images[i]))


def chain_lift(
    f_map: ModuleMap,
    source: Resolution,
    target: ExactComplex,
    *,
    rng: Optional[np.random.Generator] = None,
) -> ChainMap:
    """Lift f: M -> M' to P_* -> T_* where T_* is any exact complex over M' (weight block by block).

    With rng, each generator image is perturbed by a random element of the kernel, giving an
    independent lift of the same map.
    """
    f = source.target.field
    F = np.asarray(f_map.matrix, dtype=np.int64)
    images: List[List[np.ndarray]] = []
    prev_maps: List[Dict[Weight, np.ndarray]] = []
    for i, step in enumerate(source.steps):
        T_i = target.module(i)
        cur: List[np.ndarray] = []
        for lam, g in zip(step.lambdas, step.generators):
            if i == 0:
                rows = target.target.block(lam)
                cols = source.target.block(lam)
                t = f.matmul(F[np.ix_(rows, cols)], g)
            else:
                kappa = _assemble(target.module(i - 1), prev_maps, lam)
                t = f.matmul(kappa, g) if kappa.size else np.zeros(target.module(i - 1).block_dim(lam), dtype=np.int64)
            d = target.block(i, lam)
            if d.shape[1] == 0:
                if t.any():
                    raise SpfhError(f"target complex is not exact at step {i}, weight {lam}")
                cur.append(np.zeros(0, dtype=np.int64))
                continue
            w = f.solve(d, t)
            if w is None:
                raise SpfhError(f"target complex is not exact at step {i}, weight {lam}")
            if rng is not None:
                K = f.kernel(d)
                if K.shape[1]:
                    w = f.add(w, f.matmul(K, f.random(K.shape[1], rng)))
            cur.append(w)
        images.append(cur)
        prev_maps = [yoneda_map(T_i, l, w) for l, w in zip(step.lambdas, cur)]
    return ChainMap(source, target, images)


@dataclass
class InducedMap:
    degree: int
    source_dim: int
    target_dim: int
    rank: int


def induced_rank(
    chain: ChainMap,
    upper: ExtComplex,
    lower: ExtComplex,
    degree: int,
    weight_map: Optional[Callable[[Weight], Optional[Weight]]] = None,
) -> InducedMap:
    """Rank of the map Ext^i(target side) -> Ext^i(source side) induced by the chain map.

    `upper` is Hom(T_*, N) for a projective resolution T_* whose twisted copy the chain lands in
    (weight_map translates weights), `lower` is Hom(P_*, N') for the chain's source.
    """
    T = pullback_matrix(chain.vectors(degree), upper.resolution.steps[degree].projective, upper.ytab, weight_map)
    return cochain_map_rank(T, upper, lower, degree)


def cochain_map_rank(T: np.ndarray, upper: CochainComplex, lower: CochainComplex, degree: int) -> InducedMap:
    """Rank on cohomology of the cochain map T: upper C^i -> lower C^i.

    Computed as rank([T Z | B]) - rank(B) for representatives Z of the upper classes
    and the lower coboundaries B.
    """
    f = upper.field
    Z = upper.representatives(degree)
    B = lower.coboundaries(degree)
    src_dim = upper.dim(degree)
    tgt_dim = lower.dim(degree)
    if Z.shape[1] == 0 or T.shape[0] == 0:
        return InducedMap(degree, src_dim, tgt_dim, 0)
    TZ = f.matmul(T, Z)
    rank_b = f.rank(B) if B.size else 0
    rank = (f.rank(np.hstack([TZ, B])) if B.size else f.rank(TZ)) - rank_b
    return InducedMap(degree, src_dim, tgt_dim, rank)


# ---- orbit-sum presentation (independent check) -------------------------------------------


def orbit_sum_action(E: FunctorExpr, n: int, field: FieldSpec) -> List[np.ndarray]:
    """Action of the orbit-sum (divided-power monomial) basis of the Schur algebra on E(k^n).

    Uses the substitution t_ab -> t^(B^idx) with B = D + 1 so that each monomial of
    total degree D lands on a distinct power of t.
    """
    D = E.degree(field.p)
    B = D + 1
    coords = n * n
    T = D * B ** (coords - 1) + 1 if coords else 1
    A = np.zeros((T, n, n), dtype=np.int64)
    for idx, (a, b) in enumerate(itertools.product(range(n), range(n))):
        A[B**idx, a, b] = 1
    X = act(E, A, field)
    mats = []
    for m in compositions(D, coords):
        e = sum(c * B**idx for idx, c in enumerate(m))
        mats.append(X[e])
    return mats


class OrbitSumAlgebra:
    """S(n, D) realized on the tensor power, with its regular representation."""

    def __init__(self, n: int, D: int, field: FieldSpec) -> None:
        self.n, self.D, self.field = n, D, field
        f = field
        self.basis = orbit_sum_action(ten(D), n, field)
        self.dim = len(self.basis)
        flat = np.stack([b.reshape(-1) for b in self.basis], axis=1)
        if f.rank(flat) != self.dim:
            raise SpfhError("orbit sums are not independent on the tensor power")
        self.left: List[np.ndarray] = []
        for a in self.basis:
            prods = np.stack([f.matmul(a, b).reshape(-1) for b in self.basis], axis=1)
            coeffs = f.solve(flat, prods)
            if coeffs is None:
                raise SpfhError("orbit-sum span is not closed under products")
            self.left.append(coeffs)

    def commutant_dim(self, M_mats: Sequence[np.ndarray], N_mats: Sequence[np.ndarray]) -> int:
        f = self.field
        nm = N_mats[0].shape[0]
        mm = M_mats[0].shape[1]
        if nm == 0 or mm == 0:
            return 0
        rows = []
        for Ma, Na in zip(M_mats, N_mats):
            rows.append(f.sub(np.kron(Na, np.eye(mm, dtype=np.int64)), np.kron(np.eye(nm, dtype=np.int64), Ma.T)))
        return nm * mm - f.rank(np.vstack(rows))

    def ext(self, M_mats: Sequence[np.ndarray], N_mats: Sequence[np.ndarray], max_degree: int) -> Tuple[int, ...]:
        """Ext over the algebra by a free resolution with its regular module."""
        f = self.field
        A = self.dim
        action = list(M_mats)
        ambient_dim = action[0].shape[0]
        K = np.eye(ambient_dim, dtype=np.int64)
        gen_vectors: List[List[np.ndarray]] = []
        for _ in range(max_degree + 2):
            span = EchelonBasis(f, ambient_dim)
            gens: List[np.ndarray] = []
            cols: List[np.ndarray] = []
            for c in range(K.shape[1]):
                if span.rank == K.shape[1]:
                    break
                v = K[:, c]
                if span.contains(v):
                    continue
                image = np.stack([f.matmul(a, v) for a in action], axis=1)
                span.extend(image.T)
                gens.append(v)
                cols.append(image)
            gen_vectors.append(gens)
            d = np.hstack(cols) if cols else np.zeros((ambient_dim, 0), dtype=np.int64)
            K = f.kernel(d)
            action = [np.kron(np.eye(len(gens), dtype=np.int64), L) for L in self.left]
            ambient_dim = A * len(gens)
        nd = N_mats[0].shape[0]
        dims = []
        deltas = []
        for i in range(1, max_degree + 2):
            rows = []
            for v in gen_vectors[i]:
                row = []
                for k in range(len(gen_vectors[i - 1])):
                    c = v[k * A : (k + 1) * A]
                    blk = np.zeros((nd, nd), dtype=np.int64)
                    for b in np.flatnonzero(c):
                        blk = f.add(blk, f.mul(c[b], N_mats[b]))
                    row.append(blk)
                rows.append(np.hstack(row) if row else np.zeros((nd, 0), dtype=np.int64))
            cols_dim = nd * len(gen_vectors[i - 1])
            deltas.append(np.vstack(rows) if rows else np.zeros((0, cols_dim), dtype=np.int64))
        for i in range(max_degree + 1):
            c_i = nd * len(gen_vectors[i])
            r_next = f.rank(deltas[i]) if deltas[i].size else 0
            r_here = f.rank(deltas[i - 1]) if i > 0 and deltas[i - 1].size else 0
            dims.append(c_i - r_next - r_here)
        return tuple(dims)


def orbit_sum_ext(F: FunctorExpr, G: FunctorExpr, n: int, field: FieldSpec, max_degree: int) -> Tuple[int, ...]:
    D = F.degree(field.p)
    if G.degree(field.p) != D:
        return tuple([0] * (max_degree + 1))
    alg = OrbitSumAlgebra(n, D, field)
    return alg.ext(orbit_sum_action(F, n, field), orbit_sum_action(G, n, field), max_degree)


def orbit_sum_hom_dim(F: FunctorExpr, G: FunctorExpr, n: int, field: FieldSpec) -> int:
    D = F.degree(field.p)
    if G.degree(field.p) != D:
        return 0
    alg = OrbitSumAlgebra(n, D, field)
    return alg.commutant_dim(orbit_sum_action(F, n, field), orbit_sum_action(G, n, field))
