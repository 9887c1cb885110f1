import pytest

from spfh.engine.compare import (
    ComparisonReport,
    ComparisonRow,
    _raise_if_contradicted,
    dump_matrices,
    gen_comp_map,
    run_instance,
    strong_phi,
    verdict_for,
    verdict_suite,
)
from spfh.engine.errors import ShapeError, TheoremContradiction
from spfh.engine.expr import direct_sum, div, ext, ident, sym


@pytest.mark.parametrize(
    "rank,source,target,verdict",
    [
        (1, 1, 1, "iso"),
        (1, 1, 2, "not_surjective"),
        (1, 2, 1, "not_injective"),
        (1, 2, 2, "neither"),
        (0, 0, 0, "iso"),
    ],
)
def test_verdicts(rank, source, target, verdict):
    assert verdict_for(rank, source, target) == verdict


def test_contradiction_needs_coverage():
    assert ComparisonRow(0, 1, 1, 0, covered=True).contradiction
    assert not ComparisonRow(0, 1, 1, 0, covered=False).contradiction
    assert not ComparisonRow(0, 1, 1, 1, covered=True).contradiction


def test_contradictions_raise_in_strict_mode():
    report = ComparisonReport("strong", {"F": "id", "G": "id"}, [ComparisonRow(0, 1, 1, 0, covered=True)])
    assert not report.passed
    _raise_if_contradicted(report, strict=False)
    with pytest.raises(TheoremContradiction) as info:
        _raise_if_contradicted(report, strict=True)
    assert info.value.exit_code == 2


def test_strong_identity():
    report = strong_phi(ident(), ident(), 2, 2, 0)
    row = report.rows[0]
    assert (row.source, row.target, row.rank) == (1, 1, 1)
    assert row.verdict == "iso" and row.covered
    assert report.passed


def test_strong_outside_the_theorem():
    # no strict maps Sym(1) -> Sym(2), but t*Sym(1) -> t*Sym(2) is the Frobenius on points
    report = strong_phi(sym(1), sym(2), 2, 2, 0)
    row = report.rows[0]
    assert (row.source, row.target) == (0, 1)
    assert row.verdict == "not_surjective"
    assert not row.covered
    assert report.passed


def test_generalized_identity():
    report = gen_comp_map(ident(), ident(), 2, 2, 2, 0)
    row = report.rows[0]
    assert row.verdict == "iso" and row.covered
    assert report.notes["strict_source"] == "twist(id,1)"


def test_records_carry_predictions():
    records = strong_phi(ident(), ident(), 2, 2, 0).to_records()
    assert records[0]["predicted"] == "iso"
    assert records[0]["map"] == "strong"


def test_run_instance_rejects_unknown_maps():
    with pytest.raises(ShapeError):
        run_instance({"map": "sideways", "F": "id", "G": "id", "q": 2, "N": 1})


def test_verdict_suite_and_dump(workdir):
    reports = verdict_suite([{"map": "strong", "F": "id", "G": "id", "q": 2, "N": 2, "max_degree": 0}])
    assert [r.passed for r in reports] == [True]
    path = dump_matrices(reports[0], str(workdir / "dumps"))
    assert path.exists() and path.suffix == ".npz"


@pytest.mark.slow
@pytest.mark.parametrize("F,G", [(div(2), sym(2)), (sym(2), sym(2)), (ext(2), div(2))])
def test_strong_q4(F, G):
    report = strong_phi(F, G, 4, 2, 0, check_stability=True)
    assert report.rows[0].verdict == "iso"
    assert report.passed


@pytest.mark.slow
@pytest.mark.parametrize("F", [ident(), sym(2), ext(2), div(2)])
def test_generalized_sweep_diagonal(F):
    report = gen_comp_map(F, F, 2, 2, 2, 0)
    assert report.rows[0].verdict == "iso"


def test_generalized_rejects_twists_off_the_field_degree():
    # at q = 4 the identity t*F -> t*F^(a) is natural only for even a
    with pytest.raises(ShapeError):
        gen_comp_map(ident(), ident(), 4, 1, 1, 0, n_twist=1)


def test_strong_rank_does_not_depend_on_the_twist():
    report = strong_phi(ident(), ident(), 2, 2, 0, check_twist=True)
    assert report.notes["twist_independent"] is True


def test_generalized_rank_does_not_depend_on_the_twist():
    report = gen_comp_map(ident(), ident(), 2, 1, 2, 0, check_twist=True)
    assert report.notes["twist_independent"] is True


@pytest.mark.parametrize(
    "F,G,G2,max_degree",
    [(ident(), ident(), ident(), 1), (div(2), sym(2), ext(2), 0)],
)
def test_strong_map_splits_over_direct_sums(F, G, G2, max_degree):
    whole = strong_phi(F, direct_sum(G, G2), 2, 2, max_degree, strict=False)
    left = strong_phi(F, G, 2, 2, max_degree, strict=False)
    right = strong_phi(F, G2, 2, 2, max_degree, strict=False)
    for row, a, b in zip(whole.rows, left.rows, right.rows):
        assert row.source == a.source + b.source
        assert row.target == a.target + b.target
        assert row.rank == a.rank + b.rank


def test_run_instance_passes_the_twist_check():
    report = run_instance({"map": "strong", "F": "id", "G": "id", "q": 2, "N": 2, "check_twist": True})
    assert report.notes["twist_independent"] is True
