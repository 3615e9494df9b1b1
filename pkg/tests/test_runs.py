from typing import Literal
from uuid import uuid4

import pytest
import sqlalchemy as sa

from rrwmean.config import config
from rrwmean.db import get_runs_db
from rrwmean.runs import RunRecorder, record_run, run_history


@pytest.fixture(params=["sqlite", "postgres"])
def db(request, monkeypatch, tmp_path) -> Literal["sqlite", "postgres"]:
    if request.param == "postgres":
        pg_url = request.config.getoption("--pg-url")
        if not pg_url:
            pytest.skip("--pg-url not given.")
        monkeypatch.setattr(config, "db_url", pg_url)
        monkeypatch.setattr(config, "db_schema", f"rrw_test_{uuid4().hex[:8]}")
    else:
        monkeypatch.setattr(config, "db_url", f"sqlite:///{tmp_path}/runs_test.sqlite")
    get_runs_db.cache_clear()
    return request.param


def test_on_run_start(db):
    recorder = RunRecorder(str(uuid4()), {"z": 0.5})
    recorder.on_run_start()
    table = get_runs_db().runs_table
    query = sa.select(table.c.command, table.c.started, table.c.status, table.c.args).where(
        table.c.command == recorder.command
    )
    with get_runs_db().engine.begin() as conn:
        runs = list(conn.execute(query).fetchall())
    assert len(runs) == 1
    # no columns should be null.
    assert all(v is not None for v in runs[0])
    assert runs[0].status == "running"
    assert recorder.run_id is not None


def test_on_run_error(db):
    recorder = RunRecorder(str(uuid4()))
    recorder.on_run_start()
    error = ValueError(str(uuid4()))
    recorder.on_run_error(error)
    table = get_runs_db().run_errors_table
    query = sa.select(table).where(table.c.run_id == recorder.run_id)
    with get_runs_db().engine.begin() as conn:
        errors = list(conn.execute(query).fetchall())
    assert len(errors) == 1
    # no columns should be null.
    assert all(v is not None for v in errors[0])
    assert errors[0].type == "ValueError"
    assert errors[0].message == str(error)


def test_on_run_finish(db):
    recorder = RunRecorder(str(uuid4()))
    recorder.on_run_start()
    recorder.seed = 7
    recorder.manifest_hash = "abc"
    recorder.on_run_finish(success=True)
    (row,) = run_history(match=recorder.command)
    assert row["status"] == "success"
    assert row["finished"] is not None
    assert row["seed"] == 7
    assert row["manifest_hash"] == "abc"


def test_record_run_marks_failures(db):
    command = str(uuid4())
    with pytest.raises(RuntimeError):
        with record_run(command):
            raise RuntimeError("boom")
    (row,) = run_history(match=command)
    assert row["status"] == "failed"


def test_history_order_and_limit(db):
    prefix = uuid4().hex
    for i in range(3):
        with record_run(f"{prefix}-{i}"):
            pass
    rows = run_history(limit=2, match=prefix)
    assert [r["command"] for r in rows] == [f"{prefix}-2", f"{prefix}-1"]


def test_recording_can_be_disabled(monkeypatch):
    monkeypatch.setattr(config, "record_runs", False)
    with record_run("no-db") as recorder:
        pass
    assert recorder.run_id is None
    assert run_history(match="no-db") == []
