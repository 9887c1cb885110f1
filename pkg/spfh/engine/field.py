"""Exact arithmetic and dense linear algebra over GF(p) and GF(p^r).

Elements are ints in [0, q). For r > 1 the base-p digits of an element are the
coefficients (low to high) of a polynomial reduced modulo the shipped Conway
polynomial, so the element p^i is x^i. Matrices are int64 numpy arrays of
element codes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple
import logging
import threading

import numpy as np

from spfh.engine.conway import conway_polynomial, is_prime, least_primitive_root
from spfh.engine.errors import FieldError, ShapeError

log = logging.getLogger(__name__)

MAX_FIELD_SIZE = 1 << 16
_FLOAT_EXACT = float(1 << 53)


@dataclass
class _Tables:
    exp: np.ndarray  # doubled, so exp[log a + log b] needs no reduction
    log: np.ndarray
    neg: np.ndarray
    inv: np.ndarray
    red: np.ndarray  # digits of x^k mod the modulus, k < 2r - 1
    pw: np.ndarray


_TABLES: Dict[Tuple[int, int], _Tables] = {}
_TABLES_LOCK = threading.Lock()


def _build_tables(p: int, r: int) -> _Tables:
    q = p**r
    pw = np.array([p**i for i in range(r)], dtype=np.int64)
    exp: List[int] = []
    if r == 1:
        g = least_primitive_root(p)
        x = 1
        for _ in range(q - 1):
            exp.append(x)
            x = x * g % p
    else:
        mod = conway_polynomial(p, r)
        digits = [1] + [0] * (r - 1)
        for _ in range(q - 1):
            exp.append(sum(d * p**i for i, d in enumerate(digits)))
            top = digits[-1]
            digits = [0] + digits[:-1]
            digits = [(digits[i] - top * mod[i]) % p for i in range(r)]
    if len(set(exp)) != q - 1:
        raise FieldError(f"modulus of GF({p}^{r}) is not primitive", p=p, r=r)

    exp_arr = np.array(exp, dtype=np.int64)
    log_arr = np.zeros(q, dtype=np.int64)
    log_arr[exp_arr] = np.arange(q - 1, dtype=np.int64)

    codes = np.arange(q, dtype=np.int64)
    if r == 1:
        neg = (-codes) % p
    else:
        neg = np.zeros(q, dtype=np.int64)
        for w in pw:
            neg += ((-((codes // w) % p)) % p) * w

    inv = np.zeros(q, dtype=np.int64)
    inv[1:] = exp_arr[(q - 1 - log_arr[1:]) % (q - 1)]

    red = np.zeros((max(2 * r - 1, 1), r), dtype=np.int64)
    for k in range(2 * r - 1):
        code = exp[k % (q - 1)]
        red[k] = (code // pw) % p

    return _Tables(
        exp=np.concatenate([exp_arr, exp_arr]),
        log=log_arr,
        neg=neg,
        inv=inv,
        red=red,
        pw=pw,
    )


@dataclass(frozen=True)
class FieldSpec:
    p: int
    r: int = 1

    def __post_init__(self) -> None:
        if not is_prime(self.p):
            raise FieldError(f"characteristic {self.p} is not prime", p=self.p)
        if self.r < 1:
            raise FieldError("extension degree must be >= 1", r=self.r)
        if self.p**self.r > MAX_FIELD_SIZE:
            raise FieldError(f"field size {self.p}^{self.r} exceeds 2^16", p=self.p, r=self.r)

    @property
    def q(self) -> int:
        return self.p**self.r

    @property
    def modulus(self) -> Tuple[int, ...]:
        return conway_polynomial(self.p, self.r)

    @property
    def tables(self) -> _Tables:
        key = (self.p, self.r)
        t = _TABLES.get(key)
        if t is None:
            with _TABLES_LOCK:
                t = _TABLES.get(key)
                if t is None:
                    t = _build_tables(self.p, self.r)
                    _TABLES[key] = t
                    log.debug("built tables for %s", self.describe())
        return t

    @property
    def generator(self) -> int:
        """Multiplicative generator (x for extensions, least primitive root for GF(p))."""
        return int(self.tables.exp[1]) if self.q > 2 else 1

    def describe(self) -> str:
        return f"GF({self.p})" if self.r == 1 else f"GF({self.p}^{self.r})"

    def elements(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)

    # ---- elementwise arithmetic -------------------------------------------------

    def add(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.p == 2:
            return a ^ b
        if self.r == 1:
            return (a + b) % self.p
        out = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
        for w in self.tables.pw:
            out += (((a // w) + (b // w)) % self.p) * w
        return out

    def neg(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if self.p == 2:
            return a.copy()
        if self.r == 1:
            return (-a) % self.p
        return self.tables.neg[a]

    def sub(self, a, b) -> np.ndarray:
        if self.r == 1 and self.p != 2:
            return (np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)) % self.p
        return self.add(a, self.neg(b))

    def mul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.r == 1:
            return (a * b) % self.p
        t = self.tables
        res = t.exp[t.log[a] + t.log[b]]
        return np.where((a == 0) | (b == 0), 0, res)

    def inv(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise FieldError("inverse of zero")
        return self.tables.inv[a]

    def power(self, a, e: int) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if e == 0:
            return np.ones_like(a)
        t = self.tables
        res = t.exp[(t.log[a] * (e % (self.q - 1))) % (self.q - 1)] if self.q > 2 else a.copy()
        return np.where(a == 0, 0, res)

    def frobenius(self, x, steps: int) -> np.ndarray:
        """x^(p^steps); negative steps invert the Frobenius."""
        x = np.asarray(x, dtype=np.int64)
        s = steps % self.r
        if s == 0:
            return x.copy()
        return self.power(x, self.p**s)

    # ---- matrices ---------------------------------------------------------------

    def identity(self, n: int) -> np.ndarray:
        return np.eye(n, dtype=np.int64)

    def zeros(self, *shape: int) -> np.ndarray:
        return np.zeros(shape, dtype=np.int64)

    def random(self, shape, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.q, size=shape, dtype=np.int64)

    def _zmatmul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        # integer product of digit matrices, reduced mod p
        k = A.shape[-1]
        if k * (self.p - 1) ** 2 < _FLOAT_EXACT:
            out = np.matmul(A.astype(np.float64), B.astype(np.float64)).astype(np.int64)
        else:
            out = np.matmul(A, B)
        return out % self.p

    def matmul(self, A, B) -> np.ndarray:
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if A.shape[-1] != (B.shape[0] if B.ndim == 1 else B.shape[-2]):
            raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
        if self.r == 1:
            return self._zmatmul(A, B)
        p, r = self.p, self.r
        t = self.tables
        Ad = [(A // w) % p for w in t.pw]
        Bd = [(B // w) % p for w in t.pw]
        C = [None] * (2 * r - 1)
        for i in range(r):
            for j in range(r):
                prod = self._zmatmul(Ad[i], Bd[j])
                C[i + j] = prod if C[i + j] is None else (C[i + j] + prod) % p
        out = np.zeros(C[0].shape, dtype=np.int64)
        for s in range(r):
            digit = np.zeros(C[0].shape, dtype=np.int64)
            for k in range(2 * r - 1):
                c = int(t.red[k, s])
                if c:
                    digit = (digit + c * C[k]) % p
            out += digit * t.pw[s]
        return out

    def rref(self, M) -> Tuple[int, List[int], np.ndarray]:
        M = np.asarray(M, dtype=np.int64)
        if M.ndim != 2:
            raise ShapeError("rref expects a matrix")
        rows, cols = M.shape
        if rows == 0 or cols == 0:
            return 0, [], M.copy()
        if self.p == 2 and self.r == 1:
            return _rref_gf2(M)
        return self._rref_dense(M)

    def _rref_dense(self, M: np.ndarray) -> Tuple[int, List[int], np.ndarray]:
        A = M.copy()
        rows, cols = A.shape
        pivots: List[int] = []
        row = 0
        for c in range(cols):
            if row == rows:
                break
            hits = np.flatnonzero(A[row:, c])
            if hits.size == 0:
                continue
            piv = row + int(hits[0])
            if piv != row:
                A[[row, piv]] = A[[piv, row]]
            if A[row, c] != 1:
                A[row, c:] = self.mul(self.inv(A[row, c]), A[row, c:])
            col = A[:, c].copy()
            col[row] = 0
            nz = np.flatnonzero(col)
            if nz.size:
                A[nz, c:] = self.sub(A[nz, c:], self.mul(col[nz, None], A[row, c:][None, :]))
            pivots.append(c)
            row += 1
        return row, pivots, A

    def rank(self, M) -> int:
        M = np.asarray(M, dtype=np.int64)
        if M.ndim == 2 and M.shape[0] > M.shape[1]:
            M = M.T
        return self.rref(M)[0]

    def kernel(self, M) -> np.ndarray:
        """Null space basis as columns."""
        M = np.asarray(M, dtype=np.int64)
        rows, cols = M.shape
        rank, pivots, R = self.rref(M)
        taken = set(pivots)
        free = [c for c in range(cols) if c not in taken]
        K = np.zeros((cols, len(free)), dtype=np.int64)
        if not free:
            return K
        K[free, np.arange(len(free))] = 1
        if rank:
            K[np.array(pivots)[:, None], np.arange(len(free))[None, :]] = self.neg(R[:rank][:, free])
        return K

    def solve(self, A, B) -> Optional[np.ndarray]:
        """A particular X with A X = B, or None when B is not in the column span."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        vector = B.ndim == 1
        if vector:
            B = B[:, None]
        rows, cols = A.shape
        if B.shape[0] != rows:
            raise ShapeError(f"solve: {A.shape} vs {B.shape}")
        X = np.zeros((cols, B.shape[1]), dtype=np.int64)
        if rows == 0:
            return X[:, 0] if vector else X
        rank, pivots, R = self.rref(np.hstack([A, B]))
        if any(c >= cols for c in pivots):
            return None
        if rank:
            X[pivots] = R[:rank, cols:]
        return X[:, 0] if vector else X

    def inverse(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.int64)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ShapeError("inverse of a non-square matrix")
        rank, _, R = self.rref(np.hstack([A, self.identity(n)]))
        if n and not np.array_equal(R[:, :n], self.identity(n)):
            raise FieldError("matrix is singular")
        return R[:, n:]

    def scatter_add(self, target: np.ndarray, index, values) -> None:
        """target[index] += values with field addition; repeated indices accumulate."""
        values = np.asarray(values, dtype=np.int64)
        if self.r == 1:
            np.add.at(target, index, values)
            target %= self.p
            return
        if self.p == 2:
            np.bitwise_xor.at(target, index, values)
            return
        out = np.zeros_like(target)
        for w in self.tables.pw:
            plane = (target // w) % self.p
            np.add.at(plane, index, (values // w) % self.p)
            out += (plane % self.p) * w
        target[...] = out

    def embedding(self, sub: "FieldSpec") -> np.ndarray:
        """Lookup table of an embedding sub -> self (codes of sub to codes of self)."""
        if sub.p != self.p or self.r % sub.r != 0:
            raise FieldError(f"{sub.describe()} does not embed in {self.describe()}")
        if sub.r == 1:
            return np.arange(self.p, dtype=np.int64)
        elems = self.elements()
        vals = np.zeros(self.q, dtype=np.int64)
        powb = np.ones(self.q, dtype=np.int64)
        for c in sub.modulus:
            vals = self.add(vals, self.mul(c, powb))
            powb = self.mul(powb, elems)
        candidates = [int(x) for x in elems if vals[x] == 0 and x != 0]
        if not candidates:
            raise FieldError(f"no root of the {sub.describe()} modulus in {self.describe()}")
        beta = candidates[0]
        table = np.zeros(sub.q, dtype=np.int64)
        bpows = [1]
        for _ in range(1, sub.r):
            bpows.append(int(self.mul(bpows[-1], beta)))
        for code in range(sub.q):
            acc = np.int64(0)
            for i in range(sub.r):
                d = (code // sub.p**i) % sub.p
                if d:
                    acc = self.add(acc, self.mul(d, bpows[i]))
            table[code] = acc
        return table


def field_for_size(q: int) -> FieldSpec:
    for p in range(2, q + 1):
        if q % p == 0:
            r, x = 0, q
            while x % p == 0:
                x //= p
                r += 1
            if x != 1:
                break
            return FieldSpec(p, r)
    raise FieldError(f"{q} is not a prime power", q=q)


def _rref_gf2(M: np.ndarray) -> Tuple[int, List[int], np.ndarray]:
    rows, cols = M.shape
    words = (cols + 63) // 64
    packed = np.packbits((M & 1).astype(np.uint8), axis=1, bitorder="little")
    buf = np.zeros((rows, words * 8), dtype=np.uint8)
    buf[:, : packed.shape[1]] = packed
    W = buf.view("<u8")
    pivots: List[int] = []
    row = 0
    for c in range(cols):
        if row == rows:
            break
        w, b = divmod(c, 64)
        bit = np.uint64(1) << np.uint64(b)
        hits = np.flatnonzero(W[row:, w] & bit)
        if hits.size == 0:
            continue
        piv = row + int(hits[0])
        if piv != row:
            W[[row, piv]] = W[[piv, row]]
        mask = (W[:, w] & bit) != 0
        mask[row] = False
        if mask.any():
            W[mask] ^= W[row]
        pivots.append(c)
        row += 1
    R = np.unpackbits(buf, axis=1, bitorder="little")[:, :cols].astype(np.int64)
    return row, pivots, R


class EchelonBasis:
    """Incrementally grown span kept in reduced row echelon form."""

    def __init__(self, field: FieldSpec, dim: int) -> None:
        self.field = field
        self.dim = dim
        self.rows = np.zeros((0, dim), dtype=np.int64)
        self.pivots: List[int] = []

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, V) -> np.ndarray:
        V = np.asarray(V, dtype=np.int64)
        if not self.pivots or V.size == 0:
            return V.copy()
        return self.field.sub(V, self.field.matmul(V[:, self.pivots], self.rows))

    def contains(self, v) -> bool:
        return not self.reduce(np.asarray(v)[None, :]).any()

    def extend(self, V) -> np.ndarray:
        """Add the rows of V; returns indices of the rows that were independent (greedy, in order)."""
        V = np.asarray(V, dtype=np.int64)
        if V.ndim == 1:
            V = V[None, :]
        if V.shape[0] == 0 or self.rank == self.dim:
            return np.zeros(0, dtype=np.int64)
        W = self.reduce(V)
        if not W.any():
            return np.zeros(0, dtype=np.int64)
        _, picked, _ = self.field.rref(W.T)
        if not picked:
            return np.zeros(0, dtype=np.int64)
        rank, pivots, R = self.field.rref(np.vstack([self.rows, W[picked]]))
        self.rows = R[:rank]
        self.pivots = pivots
        return np.array(picked, dtype=np.int64)
