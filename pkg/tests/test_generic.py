import pytest

from spfh.app.config import settings
from spfh.engine.expr import ContraDual, ident, sym, twist
from spfh.engine.generic import generic_ext, generic_tor, least_twist, stable_bound, twist_map, twist_match


@pytest.mark.parametrize("p,imax,r", [(2, 0, 0), (2, 1, 0), (2, 2, 1), (2, 3, 1), (2, 4, 2), (3, 5, 1), (3, 6, 2)])
def test_least_twist(p, imax, r):
    assert least_twist(p, imax) == r
    assert stable_bound(p, r) > imax


def test_twist_match():
    assert twist_match(1, 1, 2) == (0, 0)
    assert twist_match(2, 4, 2) == (1, 0)
    assert twist_match(4, 2, 2) == (0, 1)
    assert twist_match(3, 2, 2) is None
    assert twist_match(2, 6, 3) == (1, 0)
    assert twist_match(2, 6, 2) is None


def test_twist_map_in_the_stable_range(gf2):
    rows = twist_map(ident(), ident(), 0, 1, gf2)
    assert [(row.source_dim, row.target_dim, row.rank) for row in rows] == [(1, 1, 1), (0, 0, 0)]
    assert all(row.injective and row.iso for row in rows)


def test_twist_map_across_degrees_is_empty(gf2):
    rows = twist_map(ident(), sym(2), 0, 1, gf2)
    assert all(row.source_dim == row.target_dim == 0 for row in rows)


def test_generic_ext_claimed(gf2, monkeypatch):
    monkeypatch.setattr(settings, "verify_max_degree", 2)
    dims, cert = generic_ext(ident(), ident(), 3, gf2)
    assert dims.dims == (1, 0, 1, 0)
    assert cert.r == 1 and cert.bound == 4
    assert cert.status == "claimed"
    assert dims.certificate["kind"] == "stable_range"


def test_generic_ext_without_matching_degrees(gf2):
    dims, cert = generic_ext(ident(), sym(3), 2, gf2)
    assert dims.dims == (0, 0, 0)
    assert cert.status == "verified"


def test_generic_ext_of_twisted_input_matches(gf2, monkeypatch):
    # twisting both sides once more does not change the generic value
    monkeypatch.setattr(settings, "verify_max_degree", 2)
    a, _ = generic_ext(ident(), ident(), 1, gf2)
    b, _ = generic_ext(twist(ident(), 1), twist(ident(), 1), 1, gf2)
    assert a.dims == b.dims == (1, 0)


def test_generic_tor(gf2):
    dims, cert = generic_tor(ContraDual(ident()), ident(), 1, gf2)
    assert dims.dims == (1, 0)
    assert dims.certificate["duality"] == "kuhn(id)"
    assert cert.status == "verified"


@pytest.mark.slow
def test_generic_ext_verified_at_the_next_twist(gf2):
    dims, cert = generic_ext(ident(), ident(), 3, gf2)
    assert dims.dims == (1, 0, 1, 0)
    assert cert.status == "verified"


@pytest.mark.slow
def test_twist_map_acceptance_window(gf2):
    rows = twist_map(ident(), ident(), 1, 3, gf2)
    assert all(row.injective and row.iso for row in rows)
