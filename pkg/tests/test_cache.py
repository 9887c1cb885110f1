import numpy as np
import pytest

from spfh.app.cache import (
    ResolutionCache,
    pack_matrix,
    read_envelope,
    unpack_matrix,
    write_envelope,
)
from spfh.engine.errors import CacheCorruptError
from spfh.engine.expr import ident, sym, twist
from spfh.engine.field import FieldSpec
from spfh.engine.homalg import ext, resolve
from spfh.engine.polyfun import evaluate


@pytest.fixture
def cache(tmp_path):
    c = ResolutionCache(cache_dir=str(tmp_path / "cache"))
    yield c
    c.close()


def test_envelope(gf4):
    data = write_envelope(b"payload", gf4)
    assert data.startswith(b"SPFH1")
    assert read_envelope(data) == (2, 2, b"payload")


@pytest.mark.parametrize("pos", [0, 9, -1])
def test_envelope_detects_corruption(gf2, pos):
    data = bytearray(write_envelope(b"some payload bytes", gf2))
    data[pos] ^= 0x01
    with pytest.raises(CacheCorruptError):
        read_envelope(bytes(data))


@pytest.mark.parametrize("q", [2, 3, 4, 9])
def test_matrix_packing(q, rng):
    f = FieldSpec(2, 1) if q == 2 else (FieldSpec(3, 1) if q == 3 else (FieldSpec(2, 2) if q == 4 else FieldSpec(3, 2)))
    M = f.random((5, 11), rng)
    assert np.array_equal(unpack_matrix(pack_matrix(M, f), M.shape, f), M)


def test_put_then_get_is_byte_identical(cache, gf2):
    key = "ab" + "0" * 62
    payload = bytes(range(256)) * 3
    cache.put_bytes(key, payload, gf2, {"expr": "id", "n": 1, "policy": "dominance", "length": 0})
    assert cache.get_bytes(key, gf2) == payload
    assert [e["key"] for e in cache.entries()] == [key]


def test_keys_depend_on_the_field(gf2, gf3):
    a = ResolutionCache.key_for(sym(2), 2, gf2, "dominance")
    b = ResolutionCache.key_for(sym(2), 2, gf3, "dominance")
    c = ResolutionCache.key_for(sym(2), 2, gf2, "reverse")
    assert len({a, b, c}) == 3


def test_field_mismatch_is_a_miss(cache, gf2, gf3):
    key = "cd" + "1" * 62
    cache.put_bytes(key, b"x", gf2)
    assert cache.get_bytes(key, gf3) is None
    assert cache.get_bytes("ef" + "2" * 62, gf2) is None


def test_corrupt_entry_is_evicted(cache, gf2):
    key = "12" + "3" * 62
    path = cache.put_bytes(key, b"payload", gf2)
    data = bytearray(path.read_bytes())
    data[-3] ^= 0xFF
    path.write_bytes(bytes(data))
    assert cache.get_bytes(key, gf2) is None
    assert not path.exists()
    assert cache.entries() == []


@pytest.mark.parametrize("q", [2, 3])
def test_resolution_round_trip(cache, q):
    f = FieldSpec(q, 1)
    e = twist(ident(), 1)
    M = evaluate(e, 2, f)
    res = resolve(M, 3)
    cache.put_resolution(e, res)
    back = cache.get_resolution(e, M, 3)
    assert back is not None
    assert back.length == 3
    assert [s.lambdas for s in back.steps] == [s.lambdas for s in res.steps]
    for i in range(4):
        assert np.array_equal(back.full_matrix(i), res.full_matrix(i))
    assert ext(M, M, 2, resolution=back).dims == ext(M, M, 2).dims


def test_short_entries_miss_and_long_ones_truncate(cache, gf2):
    e = twist(ident(), 1)
    M = evaluate(e, 2, gf2)
    cache.put_resolution(e, resolve(M, 2))
    assert cache.get_resolution(e, M, 3) is None
    shorter = cache.get_resolution(e, M, 1)
    assert shorter is not None and shorter.length == 1


def test_resolve_stores_on_miss(cache, gf2):
    e = sym(2)
    M = evaluate(e, 2, gf2)
    first = cache.resolve(e, M, 2)
    assert len(cache.entries()) == 1
    second = cache.resolve(e, M, 2)
    assert [s.lambdas for s in second.steps] == [s.lambdas for s in first.steps]
