import os
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt
from pydantic_settings import BaseSettings, SettingsConfigDict

BRENTQ_MIN_RTOL = 4 * float(np.finfo(float).eps)

rrwmean_data_dir = Path.home() / ".rrwmean"


class Config(BaseSettings):
    """Runtime settings. Variables will be loaded from environment variables (RRW_*) if set."""

    # overrides any --seed flag when set.
    seed: Optional[int] = None
    workers: PositiveInt = Field(default_factory=lambda: os.cpu_count() or 1)
    data_dir: Path = rrwmean_data_dir
    db_url: Optional[str] = None
    db_schema: str = "rrwmean"
    record_runs: bool = True
    show_progress: bool = False
    # replications per random sub-stream.
    block_size: PositiveInt = 16_384

    model_config = SettingsConfigDict(env_prefix="rrw_")


config = Config()


class SolverConfig(BaseModel):
    """Every numerical tolerance used by the path solver, rate curves and optimality checks."""

    model_config = ConfigDict(frozen=True)

    # brentq tolerances; brentq rejects rtol below 4·eps.
    root_xtol: PositiveFloat = 1e-14
    root_rtol: float = Field(default=1e-15, ge=BRENTQ_MIN_RTOL)
    root_maxiter: PositiveInt = 500
    # lower end of every multiplier bracket.
    lambda_floor: PositiveFloat = 1e-12
    bracket_doublings: PositiveInt = 60
    quad_tol: PositiveFloat = 1e-11
    jump_xatol: PositiveFloat = 1e-8
    t00_xatol: PositiveFloat = 1e-6
    flat_tol: PositiveFloat = 1e-9
    transition_tol: PositiveFloat = 1e-4
    # samples used by check_optimality.
    el_points: PositiveInt = 1000
    # slopes this close to a domain edge are excluded from gradient residuals.
    edge_guard: PositiveFloat = 1e-9


DEFAULT_SOLVER_CONFIG = SolverConfig()
