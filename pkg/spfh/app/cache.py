"""On-disk resolution cache.

Envelope layout, little-endian throughout:
    b"SPFH1" | schema u8 | p u16 | r u8 | payload length u64 | payload | blake2b-64 of everything before

The payload is a u64 meta length, a JSON meta document, then the matrix blob.
Matrices over GF(2) are bit-packed row by row; others are stored as u8/u16 digits.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
import hashlib
import json
import logging
import os
import sqlite3
import struct
import tempfile
import threading

import numpy as np

from spfh import ENGINE_VERSION
from spfh.app.config import settings
from spfh.app.db import connect, init_db
from spfh.engine.errors import CacheCorruptError, CacheError
from spfh.engine.expr import FunctorExpr
from spfh.engine.field import FieldSpec
from spfh.engine.homalg import GammaSum, Resolution, ResolutionStep, resolve
from spfh.engine.polyfun import WeightedModule

log = logging.getLogger(__name__)

MAGIC = b"SPFH1"
SCHEMA_VERSION = 1
POLICY_VERSION = 1
_HEADER = struct.Struct("<BHBQ")
_CHECKSUM_BYTES = 8

_WRITE_LOCK = threading.Lock()


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=_CHECKSUM_BYTES).digest()


def write_envelope(payload: bytes, field: FieldSpec) -> bytes:
    head = MAGIC + _HEADER.pack(SCHEMA_VERSION, field.p, field.r, len(payload))
    body = head + payload
    return body + _checksum(body)


def read_envelope(data: bytes) -> Tuple[int, int, bytes]:
    """(p, r, payload); raises CacheCorruptError on any mismatch."""
    fixed = len(MAGIC) + _HEADER.size
    if len(data) < fixed + _CHECKSUM_BYTES or not data.startswith(MAGIC):
        raise CacheCorruptError("bad envelope header")
    body, tail = data[:-_CHECKSUM_BYTES], data[-_CHECKSUM_BYTES:]
    if _checksum(body) != tail:
        raise CacheCorruptError("envelope checksum mismatch")
    schema, p, r, length = _HEADER.unpack_from(data, len(MAGIC))
    if schema != SCHEMA_VERSION:
        raise CacheCorruptError(f"unsupported envelope schema {schema}")
    payload = body[fixed:]
    if len(payload) != length:
        raise CacheCorruptError("payload length mismatch")
    return p, r, payload


# ---- matrix packing ------------------------------------------------------------------------


def pack_matrix(M: np.ndarray, field: FieldSpec) -> bytes:
    M = np.asarray(M, dtype=np.int64)
    if M.size == 0:
        return b""
    if field.q == 2:
        return np.packbits(M.astype(np.uint8), axis=1, bitorder="little").tobytes()
    dtype = "<u1" if field.q <= 256 else "<u2"
    return M.astype(dtype).tobytes()


def unpack_matrix(buf: bytes, shape: Tuple[int, int], field: FieldSpec) -> np.ndarray:
    rows, cols = shape
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols), dtype=np.int64)
    if field.q == 2:
        packed = np.frombuffer(buf, dtype=np.uint8).reshape(rows, -1)
        return np.unpackbits(packed, axis=1, bitorder="little")[:, :cols].astype(np.int64)
    dtype = "<u1" if field.q <= 256 else "<u2"
    return np.frombuffer(buf, dtype=dtype).reshape(rows, cols).astype(np.int64)


class _Blob:
    def __init__(self, field: FieldSpec) -> None:
        self.field = field
        self.parts: List[bytes] = []
        self.offset = 0

    def add(self, M: np.ndarray) -> Dict[str, Any]:
        M = np.atleast_2d(np.asarray(M, dtype=np.int64))
        data = pack_matrix(M, self.field)
        ref = {"shape": list(M.shape), "offset": self.offset, "bytes": len(data)}
        self.parts.append(data)
        self.offset += len(data)
        return ref


def _take(blob: bytes, ref: Dict[str, Any], field: FieldSpec) -> np.ndarray:
    lo, size = int(ref["offset"]), int(ref["bytes"])
    if lo + size > len(blob):
        raise CacheCorruptError("matrix reference past the end of the payload")
    return unpack_matrix(blob[lo : lo + size], tuple(ref["shape"]), field)


def encode_resolution(res: Resolution, expr_text: str) -> bytes:
    f = res.target.field
    blob = _Blob(f)
    steps = []
    for step in res.steps:
        steps.append(
            {
                "lambdas": [list(l) for l in step.lambdas],
                "generators": [blob.add(np.asarray(g).reshape(1, -1)) for g in step.generators],
                "differential": [
                    {"mu": list(mu), **blob.add(M)}
                    for mu, M in sorted(step.differential.items())
                ],
                "certificate": [[list(mu), int(a), int(b)] for mu, (a, b) in sorted(step.certificate.items())],
            }
        )
    meta = {
        "engine_version": ENGINE_VERSION,
        "expr": expr_text,
        "n": res.target.n,
        "policy": res.policy,
        "length": res.length,
        "steps": steps,
    }
    head = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<Q", len(head)) + head + b"".join(blob.parts)


def decode_resolution(payload: bytes, target: WeightedModule) -> Resolution:
    f = target.field
    try:
        (meta_len,) = struct.unpack_from("<Q", payload, 0)
        meta = json.loads(payload[8 : 8 + meta_len].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CacheCorruptError(f"unreadable resolution meta: {exc}") from exc
    blob = payload[8 + meta_len :]
    if int(meta["n"]) != target.n:
        raise CacheCorruptError("cached resolution has a different rank")
    steps: List[ResolutionStep] = []
    for raw in meta["steps"]:
        lambdas = [tuple(int(x) for x in l) for l in raw["lambdas"]]
        projective = GammaSum(lambdas, target.n, f)
        generators = [_take(blob, ref, f).reshape(-1) for ref in raw["generators"]]
        differential = {tuple(int(x) for x in d["mu"]): _take(blob, d, f) for d in raw["differential"]}
        certificate = {tuple(int(x) for x in mu): (int(a), int(b)) for mu, a, b in raw["certificate"]}
        steps.append(ResolutionStep(projective, generators, differential, certificate))
    return Resolution(target, steps, policy=meta["policy"])


# ---- the cache -----------------------------------------------------------------------------


class ResolutionCache:
    """Envelope files under cache_dir plus an sqlite index of what is stored."""

    def __init__(self, cache_dir: Optional[str] = None, db_path: Optional[str] = None) -> None:
        self.root = Path(cache_dir or settings.cache_dir)
        self.db_path = db_path or str(self.root / "index.db")
        self._conn: Optional[sqlite3.Connection] = None
        self._conn_lock = threading.Lock()

    @property
    def conn(self) -> sqlite3.Connection:
        if self._conn is None:
            conn = connect(self.db_path)
            init_db(conn)
            self._conn = conn
        return self._conn

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    @staticmethod
    def key_for(expr: FunctorExpr, n: int, field: FieldSpec, policy: str) -> str:
        text = f"{field.describe()}|{expr.key()}|{n}|{policy}|v{POLICY_VERSION}"
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def path_for(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.spfh"

    def put_bytes(self, key: str, payload: bytes, field: FieldSpec, index: Optional[Dict[str, Any]] = None) -> Path:
        path = self.path_for(key)
        data = write_envelope(payload, field)
        with _WRITE_LOCK:
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            except OSError as exc:
                raise CacheError(f"cannot write cache entry {path}: {exc}", path=str(path)) from exc
            info = index or {}
            with self._conn_lock:
                self.conn.execute(
                    """
                    INSERT OR REPLACE INTO cache_entries(key, path, field, expr, n, policy, length, bytes)
                    VALUES(?,?,?,?,?,?,?,?)
                    """,
                    (
                        key,
                        str(path.relative_to(self.root)),
                        field.describe(),
                        str(info.get("expr", "")),
                        int(info.get("n", 0)),
                        str(info.get("policy", "")),
                        int(info.get("length", -1)),
                        len(data),
                    ),
                )
                self.conn.commit()
        return path

    def get_bytes(self, key: str, field: Optional[FieldSpec] = None) -> Optional[bytes]:
        """The stored payload, or None on a miss. Corrupt entries are evicted and reported as misses."""
        path = self.path_for(key)
        if not path.exists():
            return None
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise CacheError(f"cannot read cache entry {path}: {exc}", path=str(path)) from exc
        try:
            p, r, payload = read_envelope(data)
        except CacheCorruptError as exc:
            log.warning("cache entry %s is corrupt (%s); recomputing", path, exc.message)
            self.evict(key)
            return None
        if field is not None and (p, r) != (field.p, field.r):
            log.info("cache entry %s is over GF(%d^%d), wanted %s", key[:12], p, r, field.describe())
            return None
        return payload

    def evict(self, key: str) -> None:
        path = self.path_for(key)
        with _WRITE_LOCK:
            try:
                path.unlink(missing_ok=True)
            except OSError as exc:
                raise CacheError(f"cannot remove cache entry {path}: {exc}", path=str(path)) from exc
            with self._conn_lock:
                self.conn.execute("DELETE FROM cache_entries WHERE key = ?", (key,))
                self.conn.commit()

    def entries(self) -> List[Dict[str, Any]]:
        with self._conn_lock:
            rows = self.conn.execute(
                "SELECT key, path, field, expr, n, policy, length, bytes, created_at FROM cache_entries ORDER BY created_at"
            ).fetchall()
        return [dict(r) for r in rows]

    # ---- resolutions ----

    def get_resolution(self, expr: FunctorExpr, M: WeightedModule, length: int, policy: str = "dominance") -> Optional[Resolution]:
        key = self.key_for(expr, M.n, M.field, policy)
        payload = self.get_bytes(key, M.field)
        if payload is None:
            return None
        try:
            res = decode_resolution(payload, M)
        except CacheCorruptError as exc:
            log.warning("cache entry %s does not decode (%s); recomputing", key[:12], exc.message)
            self.evict(key)
            return None
        if res.length < length:
            return None
        if res.length > length:
            res = Resolution(res.target, res.steps[: length + 1], policy=res.policy)
        log.info("cache hit for %s at n=%d (%s)", expr.text(), M.n, key[:12])
        return res

    def put_resolution(self, expr: FunctorExpr, res: Resolution) -> Path:
        M = res.target
        key = self.key_for(expr, M.n, M.field, res.policy)
        payload = encode_resolution(res, expr.text())
        info = {"expr": expr.text(), "n": M.n, "policy": res.policy, "length": res.length}
        return self.put_bytes(key, payload, M.field, info)

    def resolve(self, expr: FunctorExpr, M: WeightedModule, length: int, *, policy: str = "dominance") -> Resolution:
        hit = self.get_resolution(expr, M, length, policy)
        if hit is not None:
            return hit
        log.info("cache miss for %s at n=%d; resolving to length %d", expr.text(), M.n, length)
        res = resolve(M, length, policy=policy)
        self.put_resolution(expr, res)
        return res
