import json
import sqlite3

import pytest
from pydantic import ValidationError

from spfh.app.cli import main, render, run
from spfh.app.db import get_db_path
from spfh.app.jobs import Job
from spfh.engine.errors import DegreeCapError, ResourceCapError, ShapeError


def _out(capsys):
    return json.loads(capsys.readouterr().out)


def _err(capsys):
    # the error document is the indented JSON block on stderr
    lines = capsys.readouterr().err.splitlines()
    start, stop = lines.index("{"), len(lines) - lines[::-1].index("}")
    return json.loads("\n".join(lines[start:stop]))


def test_ext_command(workdir, capsys):
    code = main(["ext", "--p", "2", "--F", "twist(id,1)", "--G", "twist(id,1)", "--max-degree", "2"])
    assert code == 0
    doc = _out(capsys)
    assert doc["schema"] == 1
    assert [row["dim"] for row in doc["rows"]] == [1, 0, 1]
    assert all(row["certificate"]["kind"] == "exact" for row in doc["rows"])


def test_ext_populates_the_cache(workdir, capsys):
    argv = ["ext", "--F", "twist(id,1)", "--G", "twist(id,1)", "--max-degree", "2"]
    assert main(argv) == 0
    first = _out(capsys)
    assert any((workdir / "cache").rglob("*.spfh"))
    assert main(argv) == 0
    second = _out(capsys)
    assert first["rows"] == second["rows"]


def test_ffss_oracle_command(workdir, capsys):
    argv = ["oracle", "ffss", "--pair", "GS", "--r", "1", "--p", "2", "--weight", "2", "--max-degree", "8"]
    assert main(argv) == 0
    rows = _out(capsys)["rows"]
    assert [(row["degree"], row["dim"]) for row in rows] == [(0, 1), (4, 1), (8, 2)]


def test_param_oracle_command(workdir, capsys):
    argv = ["oracle", "param", "--G", "sym(2)", "--dims", "1,0,1", "--max-degree", "4"]
    assert main(argv) == 0
    assert [row["dim"] for row in _out(capsys)["rows"]] == [1, 0, 1, 0, 1]


def test_fqcat_command(workdir, capsys):
    argv = ["fqcat-ext", "--F", "sym(1)", "--G", "sym(2)", "--q", "2", "--N", "2", "--max-degree", "0", "--check-stability"]
    assert main(argv) == 0
    rows = _out(capsys)["rows"]
    assert rows[0]["dim"] == 1
    assert rows[0]["certificate"]["stable"] is True


def test_compare_command(workdir, capsys):
    argv = ["compare", "--F", "id", "--G", "id", "--q", "2", "--N", "2", "--max-degree", "0"]
    assert main(argv) == 0
    rows = _out(capsys)["rows"]
    assert rows[0]["verdict"] == "iso"
    assert rows[0]["certificate"]["kind"] == "comparison"


def test_csv_output(workdir, capsys):
    out = workdir / "out" / "table.csv"
    argv = ["ext", "--F", "id", "--G", "id", "--max-degree", "1", "--format", "csv", "--output", str(out)]
    assert main(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "degree,dim,certificate"
    assert lines[1].startswith("0,1,")


def test_config_file_supplies_defaults(workdir, capsys):
    cfg = workdir / "job.json"
    cfg.write_text(json.dumps({"F": "id", "G": "id", "max_degree": 1}))
    assert main(["ext", "--config", str(cfg)]) == 0
    assert [row["dim"] for row in _out(capsys)["rows"]] == [1, 0]


def test_validation_errors(workdir, capsys):
    code = main(["ext", "--F", "id", "--G", "id", "--max-degree", "-1"])
    assert code == 1
    err = _err(capsys)
    assert err["error"]["code"] == "validation"


def test_engine_errors_are_machine_readable(workdir, capsys):
    code = main(["fqcat-ext", "--F", "id", "--G", "id", "--q", "5", "--N", "1"])
    assert code == 1
    err = _err(capsys)
    assert err["error"]["code"] == "shape"


def test_runs_are_recorded(workdir, capsys):
    main(["ext", "--F", "id", "--G", "id", "--max-degree", "0"])
    conn = sqlite3.connect(get_db_path())
    rows = conn.execute("SELECT command, exit_code, rows FROM job_runs").fetchall()
    conn.close()
    assert rows == [("ext", 0, 1)]


def test_run_is_deterministic(workdir):
    job = Job(command="ext", F="twist(id,1)", G="twist(id,1)", max_degree=2, use_cache=False)
    a, _ = run(job)
    b, _ = run(job)
    a.pop("created_at")
    b.pop("created_at")
    assert render(a) == render(b)


def test_job_caps():
    with pytest.raises(DegreeCapError):
        Job(command="ext", F="sym(11)", G="sym(1)")
    with pytest.raises(ShapeError):
        Job(command="suite")
    with pytest.raises(ShapeError):
        Job(command="compare", F="id", G="id")
    with pytest.raises(ResourceCapError):
        Job(command="fqcat-ext", F="id", G="id", q=2, N=5)
    with pytest.raises(ValidationError):
        Job(command="ext", F="id", G="id", k_degree=17)


def test_generic_commands_skip_the_degree_cap():
    job = Job(command="generic-ext", F="sym(11)", G="sym(11)")
    assert job.expr("F").degree(2) == 11


@pytest.mark.slow
def test_smoke_suite(workdir, capsys):
    assert main(["suite", "--name", "smoke"]) == 0
    rows = _out(capsys)["rows"]
    assert all(row["passed"] for row in rows)


def test_ext_closes_the_cache(workdir, capsys, monkeypatch):
    from spfh.app.cache import ResolutionCache

    closed = []
    original = ResolutionCache.close

    def close(self):
        closed.append(self)
        original(self)

    monkeypatch.setattr(ResolutionCache, "close", close)
    assert main(["ext", "--F", "twist(id,1)", "--G", "twist(id,1)", "--max-degree", "1"]) == 0
    _out(capsys)
    assert len(closed) == 1
