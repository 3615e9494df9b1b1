"""Monte Carlo simulation of the Lindley recursion W_{k+1} = max(0, W_k + X_k)."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator
from scipy.stats import norm
from tqdm import tqdm

from rrwmean import logger

from .common import ModelConfigError
from .config import DEFAULT_SOLVER_CONFIG, SolverConfig, config
from .increments import BernoulliPM1, Custom, IncrementModel
from .mlp_solver import solve_path

Side = Literal["lower", "upper"]

# largest horizon enumerated in exhaustive mode (2**n sequences).
MAX_EXHAUSTIVE_N = 20


class SimConfig(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    model: IncrementModel
    n: PositiveInt
    replications: PositiveInt = 1_000_000
    seed: int = Field(default=0, ge=0, lt=2**64)
    thresholds: List[float] = []
    keep_extreme: bool = False
    # number of W̄_n values kept, in replication order.
    reservoir: int = Field(default=0, ge=0)
    block_size: PositiveInt = Field(default_factory=lambda: config.block_size)
    # enumerate all 2**n ±1 sequences instead of sampling.
    exhaustive: bool = False

    @model_validator(mode="after")
    def _check_exhaustive(self):
        if self.exhaustive:
            if not isinstance(self.model, BernoulliPM1):
                raise ValueError("exhaustive mode is only defined for the bernoulli family.")
            if self.n > MAX_EXHAUSTIVE_N:
                raise ValueError(f"exhaustive mode supports n <= {MAX_EXHAUSTIVE_N} (got {self.n}).")
        return self

    @property
    def total(self) -> int:
        """Replications actually performed."""
        return 2**self.n if self.exhaustive else self.replications


class TailCount(BaseModel):
    r: float
    # replications with W̄_n <= r and W̄_n >= r.
    below: int
    above: int


class UpStepCounts(BaseModel):
    """Exhaustive-mode counts split by the number of +1 steps in the sequence."""

    r: float
    below: List[int]
    above: List[int]


class SimOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SimConfig
    replications: int
    tail_counts: List[TailCount]
    extreme_mean: float
    extreme_index: int
    extreme_path: Optional[List[float]] = None
    wbar_mean: float
    wbar_var: float
    wbar_samples: Optional[List[float]] = None
    up_step_counts: Optional[List[UpStepCounts]] = None

    def exact_tail_probability(self, r: float, side: Side) -> Fraction:
        """Exact P{W̄_n <= r} (lower) or P{W̄_n >= r} (upper) from an exhaustive run."""
        if self.up_step_counts is None:
            raise ModelConfigError("exact probabilities need an exhaustive run.")
        match = [c for c in self.up_step_counts if c.r == r]
        if not match:
            raise ModelConfigError(f"r={r} is not one of the run thresholds.")
        counts = match[0].below if side == "lower" else match[0].above
        alpha = Fraction(self.config.model.alpha)
        n = self.config.n
        return sum(
            (c * alpha**k * (1 - alpha) ** (n - k) for k, c in enumerate(counts)),
            Fraction(0),
        )


def lindley(increments: Sequence[float]) -> Tuple[np.ndarray, float]:
    """Trajectory W_0..W_n started at W_0 = 0 and its mean (1/n)·Σ_{i=1..n} W_i."""
    x = np.asarray(increments)
    w = np.zeros(x.size + 1, dtype=np.result_type(x.dtype, np.int64))
    for k, step in enumerate(x):
        w[k + 1] = max(w[k] + step, 0)
    wbar = float(w[1:].sum()) / x.size if x.size else 0.0
    return w, wbar


def simulate_lindley(model: IncrementModel, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    return lindley(np.asarray(model.sample(rng, n), dtype=float))


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based sub-stream for replication block ``block``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


@dataclass
class _Partial:
    """Mergeable summary of one block of replications."""

    start: int
    size: int
    below: np.ndarray
    above: np.ndarray
    best_index: int
    best_wbar: float
    best_path: Optional[np.ndarray]
    wbar_sum: float
    wbar_sumsq: float
    samples: np.ndarray
    below_ups: Optional[np.ndarray] = None
    above_ups: Optional[np.ndarray] = None


def _walk(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise recursion; returns (final sums Σ W_i, W at every step)."""
    rows, n = x.shape
    w = np.zeros((rows, n + 1), dtype=x.dtype)
    for k in range(n):
        w[:, k + 1] = np.maximum(w[:, k] + x[:, k], 0)
    return w[:, 1:].sum(axis=1), w


def _summarize(cfg: SimConfig, start: int, x: np.ndarray, ups: Optional[np.ndarray]) -> _Partial:
    n = cfg.n
    sums, w = _walk(x)
    wbar = sums / n
    below, above = [], []
    below_ups, above_ups = [], []
    for r in cfg.thresholds:
        if ups is None:
            lo, hi = wbar <= r, wbar >= r
        else:
            # integer sums against exact rational thresholds.
            rn = Fraction(r) * n
            lo, hi = sums <= math.floor(rn), sums >= math.ceil(rn)
            below_ups.append(np.bincount(ups[lo], minlength=n + 1))
            above_ups.append(np.bincount(ups[hi], minlength=n + 1))
        below.append(int(lo.sum()))
        above.append(int(hi.sum()))
    best = int(np.argmax(sums))
    return _Partial(
        start=start,
        size=x.shape[0],
        below=np.array(below, dtype=np.int64),
        above=np.array(above, dtype=np.int64),
        best_index=start + best,
        best_wbar=float(wbar[best]),
        best_path=w[best].astype(float) if cfg.keep_extreme else None,
        wbar_sum=float(np.sum(wbar)),
        wbar_sumsq=float(np.sum(wbar * wbar)),
        samples=wbar[: max(0, cfg.reservoir - start)].astype(float),
        below_ups=np.array(below_ups) if ups is not None else None,
        above_ups=np.array(above_ups) if ups is not None else None,
    )


def _sample_block(args) -> _Partial:
    cfg, block = args
    start = block * cfg.block_size
    size = min(cfg.block_size, cfg.total - start)
    x = np.asarray(cfg.model.sample(block_rng(cfg.seed, block), (size, cfg.n)), dtype=float)
    return _summarize(cfg, start, x, None)


def _enumerate_block(args) -> _Partial:
    cfg, block = args
    start = block * cfg.block_size
    size = min(cfg.block_size, cfg.total - start)
    index = np.arange(start, start + size, dtype=np.int64)
    # bit k of the sequence index is the sign of step k.
    bits = (index[:, None] >> np.arange(cfg.n, dtype=np.int64)) & 1
    x = 2 * bits - 1
    return _summarize(cfg, start, x, bits.sum(axis=1))


def _merge(cfg: SimConfig, parts: Sequence[_Partial]) -> SimOutcome:
    total = cfg.total
    below = sum(p.below for p in parts)
    above = sum(p.above for p in parts)
    winner = parts[0]
    for p in parts[1:]:
        # strict: ties keep the lowest replication index.
        if p.best_wbar > winner.best_wbar:
            winner = p
    wbar_sum = math.fsum(p.wbar_sum for p in parts)
    wbar_sumsq = math.fsum(p.wbar_sumsq for p in parts)
    mean = wbar_sum / total
    var = max(wbar_sumsq / total - mean * mean, 0.0)
    tail_counts = [
        TailCount(r=r, below=int(b), above=int(a))
        for r, b, a in zip(cfg.thresholds, below, above)
    ]
    up_step_counts = None
    if cfg.exhaustive:
        below_ups = sum(p.below_ups for p in parts)
        above_ups = sum(p.above_ups for p in parts)
        up_step_counts = [
            UpStepCounts(r=r, below=[int(v) for v in bu], above=[int(v) for v in au])
            for r, bu, au in zip(cfg.thresholds, below_ups, above_ups)
        ]
    samples = None
    if cfg.reservoir:
        samples = np.concatenate([p.samples for p in parts])[: cfg.reservoir].tolist()
    return SimOutcome(
        config=cfg,
        replications=total,
        tail_counts=tail_counts,
        extreme_mean=winner.best_wbar,
        extreme_index=winner.best_index,
        extreme_path=winner.best_path.tolist() if winner.best_path is not None else None,
        wbar_mean=mean,
        wbar_var=var,
        wbar_samples=samples,
        up_step_counts=up_step_counts,
    )


def run(cfg: SimConfig, workers: int = 1) -> SimOutcome:
    """Simulate ``cfg.replications`` walks (or enumerate all 2**n in exhaustive mode).

    The outcome depends only on ``cfg``: block b always draws from the same
    sub-stream and blocks are merged in index order whatever ``workers`` is.
    """
    n_blocks = -(-cfg.total // cfg.block_size)
    task = _enumerate_block if cfg.exhaustive else _sample_block
    args = [(cfg, b) for b in range(n_blocks)]
    logger.info(
        "Simulating %s: n=%s, %s replications in %s blocks (seed=%s, workers=%s)",
        cfg.model,
        cfg.n,
        cfg.total,
        n_blocks,
        cfg.seed,
        workers,
    )
    if workers > 1 and n_blocks > 1 and not isinstance(cfg.model, Custom):
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, args))
    else:
        parts = [task(a) for a in tqdm(args, desc="simulate", disable=not config.show_progress)]
    outcome = _merge(cfg, parts)
    logger.info(
        "Simulation done: extreme mean %s at replication %s", outcome.extreme_mean, outcome.extreme_index
    )
    return outcome


def pilot_mean(
    model: IncrementModel,
    steps: int = 1_000_000,
    seed: int = 0,
    burn_in: int = 10_000,
    batches: int = 50,
) -> Tuple[float, float]:
    """Long-run average of one walk and its batch-means standard error."""
    rng = block_rng(seed, 0)
    x = np.asarray(model.sample(rng, burn_in + steps), dtype=float)
    s = np.cumsum(x)
    # W_k = S_k - min(0, min_{j<=k} S_j) for a walk started at 0.
    w = s - np.minimum(np.minimum.accumulate(s), 0.0)
    means = np.array([b.mean() for b in np.array_split(w[burn_in:], batches)])
    mean = float(means.mean())
    stderr = float(means.std(ddof=1) / math.sqrt(batches))
    logger.info("Pilot mean of %s: %s (stderr %s)", model, mean, stderr)
    return mean, stderr


def wilson_interval(successes: int, total: int, level: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    z = float(norm.ppf(0.5 + level / 2))
    p = successes / total
    z2 = z * z
    denom = 1 + z2 / total
    center = (p + z2 / (2 * total)) / denom
    margin = z * math.sqrt(p * (1 - p) / total + z2 / (4 * total * total)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - margin)
    hi = 1.0 if successes == total else min(1.0, center + margin)
    return lo, hi


class TailRow(BaseModel):
    n: int
    r: float
    side: Side
    count: int
    R: int
    # (1/n)·log of the hit frequency, or the log(1/R)/n bound when censored.
    log_freq_over_n: float
    lo: Optional[float]
    hi: float
    censored: bool = False


class TailReport(BaseModel):
    pilot_mean: float
    pilot_stderr: float
    rows: List[TailRow]

    def side(self, side: Side) -> List[TailRow]:
        return [row for row in self.rows if row.side == side]


def _tail_row(n: int, r: float, side: Side, count: int, R: int) -> TailRow:
    lo, hi = wilson_interval(count, R)
    if count == 0:
        logger.warning("No %s-tail hits at n=%s, r=%s in %s replications; reporting a bound.", side, n, r, R)
        return TailRow(
            n=n,
            r=r,
            side=side,
            count=0,
            R=R,
            log_freq_over_n=math.log(1 / R) / n,
            lo=None,
            hi=math.log(hi) / n,
            censored=True,
        )
    return TailRow(
        n=n,
        r=r,
        side=side,
        count=count,
        R=R,
        log_freq_over_n=math.log(count / R) / n,
        lo=math.log(lo) / n if lo > 0 else None,
        hi=math.log(hi) / n,
    )


def tail_asymmetry_report(
    model: IncrementModel,
    r_low: float,
    r_high: float,
    n_list: Sequence[int],
    R: int,
    seed: int = 0,
    workers: int = 1,
    pilot: Optional[Tuple[float, float]] = None,
) -> TailReport:
    """Normalized log-frequencies of {W̄_n <= r_low} and {W̄_n >= r_high} for each n."""
    mean, stderr = pilot if pilot is not None else pilot_mean(model, seed=seed)
    if not r_low < mean < r_high:
        raise ModelConfigError(
            f"tail thresholds must bracket the steady-state mean {mean}: got r_low={r_low}, r_high={r_high}."
        )
    rows = []
    for n in n_list:
        outcome = run(
            SimConfig(model=model, n=n, replications=R, seed=seed, thresholds=[r_low, r_high]),
            workers=workers,
        )
        low, high = outcome.tail_counts
        rows.append(_tail_row(n, r_low, "lower", low.below, R))
        rows.append(_tail_row(n, r_high, "upper", high.above, R))
    return TailReport(pilot_mean=mean, pilot_stderr=stderr, rows=rows)


class ExtremeComparison(BaseModel):
    z_obs: float
    sup_distance: float
    l1_distance: float
    max_psi: float
    # how the theoretical excursion was placed against the observed path.
    alignment: Literal["none", "min-sup"] = "none"
    aligned_start: float = 0.0


def _l1(diff: np.ndarray, dt: float) -> float:
    d = np.abs(diff)
    return float(dt * (d[:-1] + d[1:]).sum() / 2)


def compare_extreme_to_theory(
    outcome: SimOutcome,
    model: IncrementModel,
    solver: SolverConfig = DEFAULT_SOLVER_CONFIG,
    align_points: int = 401,
) -> ExtremeComparison:
    """Distance between the scaled extreme trajectory k/n ↦ W_k/n and ψ*(·; z_obs)."""
    if outcome.extreme_path is None:
        raise ModelConfigError("the run did not keep the extreme path (keep_extreme=False).")
    n = outcome.config.n
    observed = np.asarray(outcome.extreme_path) / n
    t = np.arange(n + 1) / n
    z_obs = outcome.extreme_mean / n
    if z_obs == 0:
        return ExtremeComparison(z_obs=0.0, sup_distance=0.0, l1_distance=0.0, max_psi=0.0)
    path = solve_path(model, z_obs, solver)
    best_start, alignment = path.t0, "none"
    theory = path.evaluate(t)
    lo, hi = path.feasible_start
    if path.branch == "excursion" and hi > lo:
        alignment = "min-sup"
        starts = np.union1d(np.linspace(lo, hi, align_points), t[(t >= lo) & (t <= hi)])
        best_sup = math.inf
        for start in starts:
            candidate = path.shifted(float(start)).evaluate(t)
            sup = float(np.max(np.abs(observed - candidate)))
            if sup < best_sup:
                best_sup, best_start, theory = sup, float(start), candidate
    diff = observed - theory
    report = ExtremeComparison(
        z_obs=z_obs,
        sup_distance=float(np.max(np.abs(diff))),
        l1_distance=_l1(diff, 1 / n),
        max_psi=path.max_height(),
        alignment=alignment,
        aligned_start=best_start,
    )
    logger.info("Extreme path vs theory: %s", report)
    return report
