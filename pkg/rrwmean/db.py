import re
from datetime import datetime, timezone
from functools import cache
from pathlib import Path
from typing import Optional

import sqlalchemy as sa

from rrwmean import logger
from rrwmean.common import ModelConfigError
from rrwmean.config import config


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class RunsDB:
    """Run-history tables: one row per CLI run and one per error it raised."""

    def __init__(self, db_url: Optional[str] = None, schema_name: Optional[str] = None):
        db_url = db_url or config.db_url
        schema_name = schema_name or config.db_schema
        if not db_url:
            db_dir = Path(config.data_dir).expanduser()
            db_dir.mkdir(parents=True, exist_ok=True, mode=0o755)
            db_url = f"sqlite:///{db_dir}/rrwmean.sqlite"
        self.dialect = re.search(r"^[a-z]+", db_url).group()
        if self.dialect == "sqlite":
            # schemas are not supported by SQLite. Will not use any provided schema.
            schema_name = None
        elif self.dialect != "postgresql":
            raise ModelConfigError(f"Unsupported database dialect: {self.dialect}")
        logger.info("Using database: %s", db_url)
        self.db_url = db_url
        self.engine = sa.create_engine(db_url)
        if schema_name:
            with self.engine.begin() as conn:
                if not conn.dialect.has_schema(conn, schema_name):
                    logger.info("Creating schema '%s'", schema_name)
                    conn.execute(sa.schema.CreateSchema(schema_name))
        meta = sa.MetaData(schema=schema_name)
        self.runs_table = sa.Table(
            "runs",
            meta,
            sa.Column("run_id", sa.Integer, primary_key=True, autoincrement=True),
            sa.Column("command", sa.String, nullable=False),
            sa.Column("started", sa.DateTime(timezone=True), default=_utcnow),
            sa.Column("finished", sa.DateTime(timezone=True)),
            sa.Column("status", sa.String),
            sa.Column("seed", sa.BigInteger),
            sa.Column("manifest_hash", sa.String),
            sa.Column("args", sa.String),
        )
        self.run_errors_table = sa.Table(
            "run_errors",
            meta,
            sa.Column("run_id", sa.Integer, primary_key=True),
            sa.Column("time", sa.DateTime(timezone=True), default=_utcnow, primary_key=True),
            sa.Column("type", sa.String),
            sa.Column("message", sa.String),
        )
        with self.engine.begin() as conn:
            meta.create_all(conn, checkfirst=True)


@cache
def get_runs_db() -> RunsDB:
    return RunsDB()
