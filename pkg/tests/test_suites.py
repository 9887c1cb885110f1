import pytest

from spfh.app.suites import (
    CheckResult,
    _guarded,
    check_hom_counterexample,
    check_oracle_consistency,
    check_twisted_identity,
    run_checks,
    run_suite,
)
from spfh.engine.errors import SpfhError, TheoremContradiction


def test_cheap_checks_pass():
    results = run_checks([check_twisted_identity, check_hom_counterexample, check_oracle_consistency], workers=2)
    assert [r.passed for r in results] == [True, True, True]
    assert all(r.to_dict()["certificate"] == {"kind": "suite"} for r in results)


def test_guarded_turns_errors_into_failures():
    def check_contradicted():
        raise TheoremContradiction("not an isomorphism", degree=0)

    def check_broken():
        raise SpfhError("boom")

    a, b = _guarded(check_contradicted), _guarded(check_broken)
    assert (a.passed, a.contradiction) == (False, True)
    assert (b.passed, b.contradiction) == (False, False)
    assert b.detail["code"] == "engine"


def test_unknown_suite():
    with pytest.raises(SpfhError):
        run_suite("nightly")


def test_compare_suite_with_custom_instances(workdir):
    results = run_suite("compare", instances=[{"map": "strong", "F": "id", "G": "id", "q": 2, "N": 2}])
    assert len(results) == 1
    assert isinstance(results[0], CheckResult)
    assert results[0].passed


@pytest.mark.slow
def test_acceptance_suite(workdir):
    results = run_suite("acceptance", workers=2)
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
