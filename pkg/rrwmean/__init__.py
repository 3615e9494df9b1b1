from quicklogs import get_logger

logger = get_logger("rrwmean")

__version__ = "0.1.0"

from .common import (
    DomainError,
    ExtendedReal,
    InfeasibleAreaError,
    InfeasibleTargetError,
    ModelConfigError,
    RRWError,
    SolverConvergenceError,
)
from .config import DEFAULT_SOLVER_CONFIG, SolverConfig, config
from .increments import (
    BernoulliPM1,
    Custom,
    Gaussian,
    IncrementModel,
    PoissonBatch,
    ShiftedExponential,
    model_from_json,
)
from .mlp_solver import (
    MostLikelyPath,
    RateCurve,
    check_optimality,
    eval_path,
    evaluate_functional,
    rate_curve,
    rate_function,
    solve_path,
)
from .dp_oracle import DpGrid, DpSolution, compare, dp_solve
from .mc_engine import (
    SimConfig,
    SimOutcome,
    compare_extreme_to_theory,
    pilot_mean,
    run,
    simulate_lindley,
    tail_asymmetry_report,
)
