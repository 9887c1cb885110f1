"""Shipped check suites: smoke, acceptance and the comparison-verdict suite."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable, Dict, List, Optional
import logging

from spfh.app.config import settings
from spfh.engine.compare import gen_comp_map, strong_phi, verdict_suite
from spfh.engine.errors import SpfhError, TheoremContradiction
from spfh.engine.expr import ContraDual, KuhnDual, div, ext as ext_leaf, ident, sym, twist
from spfh.engine.field import field_for_size
from spfh.engine.fqcat import TruncCat, cat_ext_expr
from spfh.engine.generic import twist_map
from spfh.engine.homalg import ext_expr, hom_space, orbit_sum_ext, tor
from spfh.engine.oracle import example_one, ffss_series, ffss_tor_series, relabel_tor_series
from spfh.engine.polyfun import evaluate, kuhn_dual

log = logging.getLogger(__name__)

# comparison instances run by `suite --name compare` unless a config file supplies others
COMPARE_INSTANCES: List[Dict[str, Any]] = [
    {"map": "strong", "F": "div(2)", "G": "sym(2)", "q": 4, "N": 2, "max_degree": 0},
    {"map": "strong", "F": "sym(1)", "G": "sym(2)", "q": 2, "N": 2, "max_degree": 0},
    {"map": "strong", "F": "sym(1)", "G": "ext(3)", "q": 2, "N": 2, "max_degree": 0},
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: Dict[str, Any] = dc_field(default_factory=dict)
    contradiction: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check": self.name,
            "passed": self.passed,
            "contradiction": self.contradiction,
            "detail": self.detail,
            "certificate": {"kind": "suite"},
        }


# ---- individual checks -------------------------------------------------------------------


def check_twisted_identity() -> CheckResult:
    f = field_for_size(2)
    F = twist(ident(), 1)
    got = ext_expr(F, F, 2, f, 2).dims
    oracle = orbit_sum_ext(F, F, 2, f, 2)
    return CheckResult("twisted_identity_ext", got == (1, 0, 1) and oracle == got, {"engine": got, "orbit_sum": oracle})


def check_stable_range() -> CheckResult:
    rows = twist_map(ident(), ident(), 1, 3, field_for_size(2))
    ok = all(row.injective and row.iso for row in rows)
    return CheckResult("stable_range_twist_map", ok, {"rows": [row.to_dict() for row in rows]})


def check_ffss_windows() -> CheckResult:
    f = field_for_size(2)
    F = twist(ident(), 2)
    detail = {}
    ok = True
    for label, X, pair in (("sym2", sym(2), "GS"), ("div2", div(2), "GG")):
        got = ext_expr(F, twist(X, 1), 4, f, 3).dims
        want = ffss_series(pair, 1, 1, 2, max_degree=3, max_weight=1).at_weight(1)
        detail[label] = {"engine": got, "series": want}
        ok = ok and got == want
    return CheckResult("ffss_windows", ok, detail)


def check_hom_counterexample() -> CheckResult:
    f = field_for_size(2)
    strict = len(hom_space(evaluate(sym(1), 2, f), evaluate(sym(2), 2, f)))
    cat = {N: cat_ext_expr(sym(1), sym(2), TruncCat(2, N), 0).dims[0] for N in (2, 3)}
    return CheckResult("hom_counterexample", strict == 0 and all(v == 1 for v in cat.values()), {"strict": strict, "cat": cat})


def check_generalized_sweep() -> CheckResult:
    functors = [ident(), sym(2), ext_leaf(2), div(2)]
    verdicts = {}
    contradiction = False
    for F in functors:
        for G in functors:
            report = gen_comp_map(F, G, 2, 2, 2, 0, strict=False)
            row = report.rows[0]
            verdicts[f"{F.text()}->{G.text()}"] = {"verdict": row.verdict, "rank": row.rank, "source": row.source, "target": row.target}
            contradiction = contradiction or not report.passed
    ok = all(v["verdict"] == "iso" for v in verdicts.values())
    return CheckResult("generalized_comparison_q2_s2", ok, verdicts, contradiction)


def check_strong_q4() -> CheckResult:
    functors = [sym(2), div(2), ext_leaf(2)]
    verdicts = {}
    contradiction = False
    stable_seen = False
    for i, F in enumerate(functors):
        for G in functors:
            report = strong_phi(F, G, 4, 2, 0, check_stability=(i == 0 and G == functors[0]), strict=False)
            verdicts[f"{F.text()}->{G.text()}"] = report.rows[0].verdict
            contradiction = contradiction or not report.passed
            stable_seen = stable_seen or bool(report.notes.get("stable"))
    ok = all(v == "iso" for v in verdicts.values()) and stable_seen
    return CheckResult("strong_comparison_q4", ok, {"verdicts": verdicts, "stability_confirmed": stable_seen}, contradiction)


def check_identity_cat_ext() -> CheckResult:
    tables = {N: cat_ext_expr(ident(), ident(), TruncCat(2, N), 3).dims for N in (3, 4)}
    report = gen_comp_map(ident(), ident(), 2, 2, 3, 3, strict=False)
    generic_side = tuple(row.source for row in report.rows)
    ok = tables[3] == tables[4] == (1, 0, 1, 0) and generic_side == tables[3]
    return CheckResult("identity_cat_ext", ok, {"cat": tables, "generic": generic_side}, not report.passed)


def check_duality_and_policies() -> CheckResult:
    f = field_for_size(2)
    detail: Dict[str, Any] = {}
    ok = True
    instances = [
        (twist(ident(), 1), twist(ident(), 1), 2, 2),
        (twist(ident(), 2), twist(sym(2), 1), 4, 3),
        (twist(ident(), 2), twist(div(2), 1), 4, 3),
    ]
    for F, G, n, top in instances:
        e = ext_expr(F, G, n, f, top).dims
        # Tor(cdual(X), F) = Ext(F, kuhn(X)) and kuhn(kuhn(G)) = G
        t = tor(ContraDual(KuhnDual(G)), F, top, n, f).dims
        same = e == t
        detail[f"{F.text()},{G.text()}"] = {"ext": e, "tor": t}
        ok = ok and same
    for F, G, n, top in (instances[0], instances[1]):
        a = ext_expr(F, G, n, f, top, policy="dominance").dims
        b = ext_expr(F, G, n, f, top, policy="reverse").dims
        detail[f"policies {F.text()},{G.text()}"] = {"dominance": a, "reverse": b}
        ok = ok and a == b
    return CheckResult("duality_and_policies", ok, detail)


def check_oracle_consistency() -> CheckResult:
    bad = []
    for p in (2, 3):
        for r in range(0, 3):
            ext_side = ffss_series("GS", 1, r, p, max_degree=20, max_weight=3).dims
            tor_side = relabel_tor_series(ffss_tor_series("GG", 1, r, p, max_degree=20, max_weight=3))
            if ext_side != tor_side:
                bad.append({"p": p, "r": r})
    odd = all(not any(example_one(d, 2, 3, 12)) for d in range(1, 10, 2))
    return CheckResult("oracle_consistency", not bad and odd, {"mismatches": bad, "odd_vanishing": odd})


def check_kuhn_duality(max_d: int = 3, max_n: int = 3) -> CheckResult:
    detail = {}
    ok = True
    for p in (2, 3):
        f = field_for_size(p)
        for d in range(1, max_d + 1):
            for n in range(1, max_n + 1):
                K, D = kuhn_dual(evaluate(sym(d), n, f)), evaluate(div(d), n, f)
                witnessed = any(
                    m.certified and m.matrix.shape[0] == m.matrix.shape[1] and f.rank(m.matrix) == D.dim
                    for m in hom_space(K, D)
                )
                detail[f"p={p},d={d},n={n}"] = witnessed
                ok = ok and witnessed
    return CheckResult("kuhn_duality", ok, detail)


ACCEPTANCE: List[Callable[[], CheckResult]] = [
    check_twisted_identity,
    check_stable_range,
    check_ffss_windows,
    check_hom_counterexample,
    check_generalized_sweep,
    check_strong_q4,
    check_identity_cat_ext,
    check_duality_and_policies,
    check_oracle_consistency,
    check_kuhn_duality,
]

SMOKE: List[Callable[[], CheckResult]] = [
    check_twisted_identity,
    check_hom_counterexample,
    check_oracle_consistency,
    lambda: check_kuhn_duality(max_d=2, max_n=2),
]


def _guarded(check: Callable[[], CheckResult]) -> CheckResult:
    name = getattr(check, "__name__", "check").replace("check_", "")
    try:
        return check()
    except TheoremContradiction as exc:
        log.error("check %s: %s", name, exc.message)
        return CheckResult(name, False, exc.to_dict(), contradiction=True)
    except SpfhError as exc:
        log.error("check %s failed: %s", name, exc.message)
        return CheckResult(name, False, exc.to_dict())


def run_checks(checks: List[Callable[[], CheckResult]], workers: Optional[int] = None) -> List[CheckResult]:
    with ThreadPoolExecutor(max_workers=max(1, workers or settings.workers)) as pool:
        return list(pool.map(_guarded, checks))


def run_suite(name: str, *, workers: Optional[int] = None, instances: Optional[List[Dict[str, Any]]] = None) -> List[CheckResult]:
    if name == "acceptance":
        return run_checks(ACCEPTANCE, workers)
    if name == "smoke":
        return run_checks(SMOKE, workers)
    if name == "compare":
        reports = verdict_suite(instances or COMPARE_INSTANCES, workers=workers)
        out = []
        for report in reports:
            out.append(
                CheckResult(
                    f"{report.name}:{report.params['F']}->{report.params['G']}@q={report.params['q']}",
                    report.passed,
                    {"rows": report.to_records(), "notes": report.notes},
                    contradiction=not report.passed,
                )
            )
        return out
    raise SpfhError(f"unknown suite {name!r}", known=["acceptance", "smoke", "compare"])
