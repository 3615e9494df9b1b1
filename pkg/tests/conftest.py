import pytest

from rrwmean.config import config
from rrwmean.db import get_runs_db


def pytest_addoption(parser):
    parser.addoption(
        "--pg-url",
        action="store",
        help="URL to a PostgreSQL database that should be used for testing. A temporary schema will be created in this database.",
    )
    parser.addoption(
        "--mc-reps",
        action="store",
        type=int,
        default=1_000_000,
        help="Replications used by the stochastic simulation checks.",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: lattice oracle and large simulation checks.")


@pytest.fixture
def mc_reps(request) -> int:
    return request.config.getoption("--mc-reps")


@pytest.fixture(autouse=True)
def runs_db_dir(monkeypatch, tmp_path):
    """Keep run history of every test in a throwaway sqlite file."""
    monkeypatch.setattr(config, "data_dir", tmp_path)
    monkeypatch.setattr(config, "db_url", None)
    get_runs_db.cache_clear()
    yield tmp_path
    get_runs_db.cache_clear()
