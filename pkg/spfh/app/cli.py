"""Command-line driver: one Job in, one JSON result document out.

Exit codes: 0 when every verdict passes, 1 on computation or validation failure,
2 when a theorem-covered verdict is contradicted.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sqlite3
import sys
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from spfh import ENGINE_VERSION
from spfh.app.cache import ResolutionCache
from spfh.app.config import settings
from spfh.app.db import connect, init_db
from spfh.app.jobs import Job
from spfh.app.logging_setup import setup_logging
from spfh.app.suites import run_suite
from spfh.engine.compare import dump_matrices, run_instance
from spfh.engine.errors import ShapeError, SpfhError
from spfh.engine.field import FieldSpec, field_for_size
from spfh.engine.fqcat import TruncCat, cat_ext_expr, stabilization_scan
from spfh.engine.generic import generic_ext, generic_tor
from spfh.engine.homalg import ext, tor
from spfh.engine.oracle import e_infty_ext, ffss_series, ffss_tor_series, gl_factor, param_graded
from spfh.engine.polyfun import evaluate

log = logging.getLogger(__name__)

RESULT_SCHEMA = 1

Rows = List[Dict[str, Any]]


def _degree_rows(dims: Sequence[int], certificate: Dict[str, Any]) -> Rows:
    return [{"degree": i, "dim": int(d), "certificate": certificate} for i, d in enumerate(dims)]


def _rank_n(job: Job, *exprs) -> int:
    if job.n is not None:
        return job.n
    return max([e.max_degree(job.p) for e in exprs] + [1])


# ---- commands ------------------------------------------------------------------------------


def _run_ext(job: Job, f: FieldSpec) -> Tuple[Rows, int]:
    F, G = job.expr("F"), job.expr("G")
    n = _rank_n(job, F, G)
    M, N = evaluate(F, n, f), evaluate(G, n, f)
    res = None
    if job.use_cache and len(M.degrees) == 1:
        cache = ResolutionCache()
        try:
            res = cache.resolve(F, M, job.max_degree + 1, policy=job.policy)
        finally:
            cache.close()
    out = ext(M, N, job.max_degree, policy=job.policy, resolution=res)
    return _degree_rows(out.dims, out.certificate), 0


def _run_tor(job: Job, f: FieldSpec) -> Tuple[Rows, int]:
    E, F = job.expr("F"), job.expr("G")
    out = tor(E, F, job.max_degree, _rank_n(job, E, F), f, policy=job.policy)
    return _degree_rows(out.dims, out.certificate), 0


def _run_generic(job: Job, f: FieldSpec) -> Tuple[Rows, int]:
    F, G = job.expr("F"), job.expr("G")
    run = generic_ext if job.command == "generic-ext" else generic_tor
    dims, _ = run(F, G, job.max_degree, f, n=job.n, policy=job.policy)
    return _degree_rows(dims.dims, dims.certificate), 0


def _cat_field(job: Job, f: FieldSpec) -> Optional[FieldSpec]:
    sub = field_for_size(job.q)
    return f if f.p == sub.p and f.r % sub.r == 0 else None


def _run_fqcat(job: Job, f: FieldSpec) -> Tuple[Rows, int]:
    F, G = job.expr("F"), job.expr("G")
    kf = _cat_field(job, f)
    if not job.check_stability:
        out = cat_ext_expr(F, G, TruncCat(job.q, job.N, kf), job.max_degree)
        cert = {**out.certificate, "stable": None}
        return _degree_rows(out.dims, cert), 0
    top = settings.max_truncation(job.q)
    if job.N + 1 <= top:
        Ns = [job.N, job.N + 1]
    else:
        Ns = [max(job.N - 1, 0), job.N]
    report = stabilization_scan(F, G, job.q, job.max_degree, Ns, kf)
    rows = []
    for i, d in enumerate(report.table[job.N]):
        cert = {"kind": "truncation", "q": job.q, "N": job.N, "checked_against": Ns, "stable": report.stable[i]}
        rows.append({"degree": i, "dim": int(d), "certificate": cert})
    return rows, 0


def _run_compare(job: Job, f: FieldSpec) -> Tuple[Rows, int]:
    instance = {
        "map": job.map,
        "F": job.F,
        "G": job.G,
        "q": job.q,
        "N": job.N,
        "s": job.s,
        "n_twist": job.n_twist,
        "max_degree": job.max_degree,
        "stability": job.check_stability,
    }
    report = run_instance(instance, field=_cat_field(job, f))
    rows = []
    for rec in report.to_records():
        rec["certificate"] = {"kind": "comparison", "predicted": rec["predicted"], "stable": rec["stable"], **report.notes}
        rows.append(rec)
    if not report.passed:
        log.error("matrices for the failing comparison written to %s", dump_matrices(report))
    return rows, 0 if report.passed else 2


def _run_oracle(job: Job, f: FieldSpec) -> Tuple[Rows, int]:
    kind = job.oracle
    if kind in ("ffss", "ffss-tor"):
        if not job.pair:
            raise ShapeError(f"oracle {kind} needs --pair")
        if kind == "ffss":
            series = ffss_series(job.pair, job.v_dim, job.r, job.p, max_degree=job.max_degree, max_weight=job.weight)
            match = lambda key: key[1] == job.weight  # noqa: E731
        else:
            series = ffss_tor_series(job.pair, job.v_dim, job.r, job.p, max_degree=job.max_degree, max_weight=job.weight)
            match = lambda key: key[2] == job.weight  # noqa: E731
        cert = {"kind": "oracle", "formula": kind, "pair": job.pair, "r": job.r, "p": job.p}
        rows = [
            {"degree": key[0], "dim": v, "weights": [key[1], key[2]], "certificate": cert}
            for key, v in sorted(series.dims.items())
            if match(key)
        ]
        return rows, 0
    if kind == "einf":
        F = job.expr("F") if job.F else None
        out = e_infty_ext(job.expr("G"), job.max_degree, F, p=job.p, field=f)
        return _degree_rows(out.dims, out.certificate), 0
    if kind == "param":
        dims = param_graded(job.expr("G"), job.dims, p=job.p, window=job.max_degree)
        return _degree_rows(dims, {"kind": "oracle", "formula": "param", "dims": job.dims}), 0
    out = gl_factor(job.expr("F"), job.expr("G"), job.ell, job.m, job.max_degree, mode=job.mode, p=job.p, field=f)
    return _degree_rows(out.dims, out.certificate), 0


def _run_suite(job: Job, f: FieldSpec) -> Tuple[Rows, int]:
    results = run_suite(job.suite, workers=job.workers, instances=job.instances)
    rows = [r.to_dict() for r in results]
    if any(r.contradiction for r in results):
        return rows, 2
    return rows, 0 if all(r.passed for r in results) else 1


DISPATCH = {
    "ext": _run_ext,
    "tor": _run_tor,
    "generic-ext": _run_generic,
    "generic-tor": _run_generic,
    "fqcat-ext": _run_fqcat,
    "compare": _run_compare,
    "oracle": _run_oracle,
    "suite": _run_suite,
}


def run(job: Job) -> Tuple[Dict[str, Any], int]:
    """Execute a validated job; returns the result document and the exit code."""
    settings.workers = job.workers
    f = field_for_size(job.q_field)
    rows, code = DISPATCH[job.command](job, f)
    doc = {
        "schema": RESULT_SCHEMA,
        "job": job.model_dump(exclude={"output", "format", "workers", "use_cache"}),
        "engine_version": ENGINE_VERSION,
        "created_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "rows": rows,
    }
    return doc, code


# ---- output --------------------------------------------------------------------------------


def render(doc: Dict[str, Any], fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True, default=str)
    rows = doc.get("rows", [])
    fields: List[str] = []
    for row in rows:
        for k in row:
            if k not in fields:
                fields.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: json.dumps(v, sort_keys=True, default=str) if isinstance(v, (dict, list)) else v for k, v in row.items()})
    return buf.getvalue().rstrip("\n")


def record_run(command: str, job_json: str, code: int, rows: int) -> None:
    try:
        conn = connect()
        init_db(conn)
        conn.execute(
            """
            INSERT INTO job_runs(run_id, command, job_json, engine_version, exit_code, rows)
            VALUES(?,?,?,?,?,?)
            """,
            (str(uuid.uuid4()), command, job_json, ENGINE_VERSION, code, rows),
        )
        conn.commit()
        conn.close()
    except (sqlite3.Error, OSError) as exc:
        log.error("could not record the run in %s: %s", settings.database_url, exc)


# ---- argparse ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--F")
    common.add_argument("--G")
    common.add_argument("--p", type=int)
    common.add_argument("--k-degree", type=int, dest="k_degree")
    common.add_argument("--n", type=int)
    common.add_argument("--max-degree", type=int, dest="max_degree")
    common.add_argument("--policy", choices=["dominance", "reverse"])
    common.add_argument("--output")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--workers", type=int)
    common.add_argument("--config", help="JSON file with job defaults (and suite instances)")
    common.add_argument("--no-cache", action="store_true")
    common.add_argument("--log-level", default=None)

    ap = argparse.ArgumentParser(prog="spfh", description="Strict polynomial functor homology workbench")
    sub = ap.add_subparsers(dest="command", required=True)

    for name in ("ext", "tor", "generic-ext", "generic-tor"):
        sub.add_parser(name, parents=[common])

    cat = sub.add_parser("fqcat-ext", parents=[common])
    cat.add_argument("--q", type=int)
    cat.add_argument("--N", type=int)
    cat.add_argument("--check-stability", action="store_true", dest="check_stability")

    cmp_ = sub.add_parser("compare", parents=[common])
    cmp_.add_argument("--map", choices=["strong", "generalized"])
    cmp_.add_argument("--q", type=int)
    cmp_.add_argument("--N", type=int)
    cmp_.add_argument("--s", type=int)
    cmp_.add_argument("--n-twist", type=int, dest="n_twist")
    cmp_.add_argument("--check-stability", action="store_true", dest="check_stability")

    orc = sub.add_parser("oracle", parents=[common])
    orc.add_argument("oracle", choices=["ffss", "ffss-tor", "einf", "param", "gl"])
    orc.add_argument("--pair")
    orc.add_argument("--r", type=int)
    orc.add_argument("--weight", type=int)
    orc.add_argument("--v-dim", type=int, dest="v_dim")
    orc.add_argument("--dims", type=lambda s: [int(x) for x in s.split(",") if x.strip()])
    orc.add_argument("--ell", type=int)
    orc.add_argument("--m", type=int)
    orc.add_argument("--mode", choices=["example", "engine"])

    st = sub.add_parser("suite", parents=[common])
    st.add_argument("--name", dest="suite")
    return ap


def job_from_args(args: argparse.Namespace) -> Job:
    data: Dict[str, Any] = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for k, v in vars(args).items():
        if k in ("config", "log_level", "no_cache") or v is None or v is False:
            continue
        data[k] = v
    if args.no_cache:
        data["use_cache"] = False
    return Job(**data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    # stdout carries the result document
    setup_logging(args.log_level or settings.log_level, stream=sys.stderr)
    code = 1
    try:
        job = job_from_args(args)
        doc, code = run(job)
    except ValidationError as exc:
        doc = {"error": {"code": "validation", "message": "invalid job", "errors": json.loads(exc.json())}}
        print(json.dumps(doc, indent=2), file=sys.stderr)
        return 1
    except SpfhError as exc:
        doc = {"error": exc.to_dict()}
        print(json.dumps(doc, indent=2, default=str), file=sys.stderr)
        if exc.exit_code == 2:
            log.error("THEOREM CONTRADICTION: %s", exc.message)
        record_run(args.command, json.dumps(vars(args), default=str), exc.exit_code, 0)
        return exc.exit_code

    text = render(doc, job.format)
    if job.output:
        out = Path(job.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
    print(text)
    if code == 2:
        log.error("THEOREM CONTRADICTION in %s; see the rows marked as such", job.command)
    record_run(job.command, job.model_dump_json(), code, len(doc["rows"]))
    return code
