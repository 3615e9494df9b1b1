import json
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import sqlalchemy as sa

from rrwmean import logger
from rrwmean.config import config

from .db import get_runs_db


class RunRecorder:
    """Records a CLI run and its errors in the run-history database."""

    def __init__(
        self,
        command: str,
        args: Optional[Dict[str, Any]] = None,
        db_record: Optional[bool] = None,
    ):
        self.command = command
        self.args = args or {}
        self.db_record = config.record_runs if db_record is None else db_record
        if self.db_record:
            self.db = get_runs_db()
        self.run_id = None
        self.errors = []
        self.seed = None
        self.manifest_hash = None

    def on_run_start(self):
        self.start_time = datetime.now(timezone.utc)
        logger.info("Starting run: %s", self.command)
        if self.db_record:
            with self.db.engine.begin() as conn:
                result = conn.execute(
                    sa.insert(self.db.runs_table).values(
                        command=self.command,
                        started=self.start_time,
                        status="running",
                        args=json.dumps(self.args, sort_keys=True, default=str),
                    )
                )
                self.run_id = result.inserted_primary_key[0]

    def on_run_error(self, error: Exception):
        self.errors.append(error)
        logger.exception("Error in run %s: %s: %s", self.command, type(error).__name__, error)
        if self.db_record:
            with self.db.engine.begin() as conn:
                conn.execute(
                    sa.insert(self.db.run_errors_table).values(
                        run_id=self.run_id,
                        type=type(error).__name__,
                        message=str(error),
                    )
                )

    def on_run_finish(self, success: bool) -> datetime:
        finish_time = datetime.now(timezone.utc)
        status = "success" if success else "failed"
        logger.info(
            "Finished run %s (%s) in %s", self.command, status, finish_time - self.start_time
        )
        if self.db_record:
            with self.db.engine.begin() as conn:
                conn.execute(
                    sa.update(self.db.runs_table)
                    .where(self.db.runs_table.c.run_id == self.run_id)
                    .values(
                        finished=finish_time,
                        status=status,
                        seed=self.seed,
                        manifest_hash=self.manifest_hash,
                    )
                )
        return finish_time


@contextmanager
def record_run(command: str, args: Optional[Dict[str, Any]] = None, db_record: Optional[bool] = None):
    """Wrap a command body; exceptions are recorded and re-raised."""
    recorder = RunRecorder(command, args, db_record=db_record)
    recorder.on_run_start()
    try:
        yield recorder
    except Exception as e:
        recorder.on_run_error(e)
        recorder.on_run_finish(success=False)
        raise
    recorder.on_run_finish(success=True)


def run_history(limit: int = 10, match: Optional[str] = None) -> List[Dict[str, Any]]:
    """Most recent runs first, optionally restricted to commands containing ``match``."""
    db = get_runs_db()
    table = db.runs_table
    query = sa.select(table).order_by(table.c.started.desc(), table.c.run_id.desc()).limit(limit)
    if match:
        query = query.where(table.c.command.like(f"%{match}%"))
    with db.engine.begin() as conn:
        return [dict(row._mapping) for row in conn.execute(query).fetchall()]
