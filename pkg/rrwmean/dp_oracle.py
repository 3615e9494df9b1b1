"""Brute-force lattice minimization of the path functional.

Paths live on a (time, height) lattice with Δt = 1/n_t and Δh = h_max/n_h and
are built from straight segments spanning up to ``span`` time steps, so the
available slopes are (d/k)·Δh/Δt. Each (height, area bin) cell keeps the
cheapest path reaching it together with that path's exact trapezoidal area.
Bins are aligned so that one of them is exactly the acceptance window
[z − Δa/2, z + Δa/2).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat
from scipy.optimize import brentq
from tqdm import tqdm

from rrwmean import logger

from .common import InfeasibleAreaError, ModelConfigError, solve_increasing
from .config import DEFAULT_SOLVER_CONFIG, SolverConfig, config
from .increments import IncrementModel
from .mlp_solver import solve_path


class DpGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_t: int = Field(ge=8)
    n_h: int = Field(ge=8)
    n_a: int = Field(ge=8)
    h_max: PositiveFloat
    a_max: PositiveFloat
    # longest straight segment, in time steps.
    span: int = Field(default=4, ge=1, le=16)
    # segments steeper than this (in either direction) are not explored.
    max_slope: Optional[PositiveFloat] = None

    @property
    def dt(self) -> float:
        return 1.0 / self.n_t

    @property
    def dh(self) -> float:
        return self.h_max / self.n_h

    @property
    def da(self) -> float:
        return self.a_max / self.n_a

    @property
    def slope_step(self) -> float:
        """Slope of a one-level, one-step move."""
        return self.h_max * self.n_t / self.n_h

    @classmethod
    def for_target(
        cls,
        model: IncrementModel,
        z: float,
        n_t: int = 200,
        n_h: int = 200,
        n_a: int = 400,
        h_max: Optional[float] = None,
        a_max: Optional[float] = None,
        span: int = 4,
        max_slope: Optional[float] = None,
    ) -> "DpGrid":
        if h_max is None:
            h_max = default_height(model, z)
        if a_max is None:
            a_max = 1.2 * z if z > 0 else 1.0
        if max_slope is None:
            max_slope = max(4 * h_max, 2 * model.delta)
        return cls(n_t=n_t, n_h=n_h, n_a=n_a, h_max=h_max, a_max=a_max, span=span, max_slope=max_slope)

    def check(self, model: IncrementModel, z: float):
        if self.a_max < 1.2 * z * (1 - 1e-9):
            raise ModelConfigError(f"a_max={self.a_max} must be at least 1.2·z={1.2 * z}.")
        headroom = default_height(model, z)
        if self.h_max < headroom * (1 - 1e-9):
            logger.warning(
                "h_max=%s is below the reachable height %s; lattice paths are restricted to [0, h_max].",
                self.h_max,
                headroom,
            )


class DpSolution(BaseModel):
    z: float
    cost: float
    # heights at t = 0, Δt, ..., 1.
    path: List[float]
    area: float
    grid: DpGrid
    # (time steps, levels) of each straight segment, in time order.
    segments: List[Tuple[int, int]] = []
    # largest increase between consecutive segment slopes on the excursion, in slope steps.
    concavity_defect: float = 0.0
    # slope of the segment that returns to zero, when the excursion ends at height 0.
    terminal_slope: Optional[float] = None
    capped: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid.n_t + 1)


class CompareReport(BaseModel):
    z: float
    analytic: float
    dp: float
    rel_gap: float
    grid: DpGrid
    solution: Optional[DpSolution] = Field(default=None, exclude=True)


def tent_upper_bound(model: IncrementModel, z: float) -> float:
    """Cost of the cheapest rise-then-fall path with area z.

    The path climbs at a constant slope s and then falls at the drift −δ,
    which costs nothing. Any optimizer costs at most this much.
    """
    delta = model.delta
    hi = model.domain[1]
    s_top = hi if math.isfinite(hi) else max(100.0 * (z + delta), 10.0)
    best = math.inf
    for s in np.geomspace(min(1e-3, s_top), s_top, 200):
        rate = float(model.rate_values(s))
        if not math.isfinite(rate) or 0.5 * s < z:
            continue

        def area(tau: float, s=s) -> float:
            height = s * tau
            fall = height / delta
            if tau + fall <= 1:
                return 0.5 * height * (tau + fall)
            rest = 1 - tau
            return 0.5 * height * tau + height * rest - 0.5 * delta * rest * rest

        tau = 1.0 if area(1.0) <= z else brentq(lambda t: area(t) - z, 0.0, 1.0)
        best = min(best, rate * tau)
    return best


def reachable_height(model: IncrementModel, budget: float, solver: SolverConfig = DEFAULT_SOLVER_CONFIG) -> float:
    """Highest level a path started at zero can reach while spending at most ``budget``.

    Climbing to height h within time τ costs at least τ·I(h/τ), so the
    bound is the largest τ·s with I(s) ≤ budget/τ over τ in (0, 1].
    """
    if not budget > 0:
        return 0.0
    if math.isinf(budget):
        return math.inf
    hi = model.domain[1]
    best = 0.0
    for tau in np.geomspace(1e-3, 1.0, 60):
        level = budget / tau
        if math.isfinite(hi) and float(model.rate_values(hi)) <= level:
            s = hi
        else:
            s = solve_increasing(
                lambda x: float(model.rate_values(x)) - level,
                -model.delta,
                hi,
                xtol=1e-10,
                rtol=1e-10,
                maxiter=solver.root_maxiter,
                doublings=solver.bracket_doublings,
                what="slope",
            )
        best = max(best, tau * s)
    return best


def default_height(model: IncrementModel, z: float) -> float:
    if z == 0:
        return 1.0
    h = max(reachable_height(model, 1.25 * tent_upper_bound(model, z)), 1.05 * z)
    if not model.coercive:
        # no lattice path can climb above r̄·1.
        h = min(h, model.r_bar.value)
    return h


def _moves(model: IncrementModel, grid: DpGrid, cap: float) -> List[Tuple[int, int, float]]:
    """All (time steps, levels, cost) segments worth exploring.

    A k-step move by d levels with gcd(d, k) > 1 is a repeat of a shorter one
    and is left out. The flat move at height zero is always present.
    """
    lo, hi = model.domain
    limit = grid.max_slope or math.inf
    moves = []
    for k in range(1, grid.span + 1):
        d = np.arange(-grid.n_h, grid.n_h + 1)
        d = d[np.gcd(np.abs(d), k) == 1]
        slopes = d * grid.slope_step / k
        # snap slopes that hit a finite domain edge up to rounding.
        for edge in (lo, hi):
            if math.isfinite(edge):
                slopes = np.where(np.isclose(slopes, edge, rtol=1e-12, atol=0), edge, slopes)
        inside = (slopes >= lo) & (slopes <= hi) & (np.abs(slopes) <= limit)
        costs = np.full(d.shape, np.inf)
        costs[inside] = model.rate_values(slopes[inside]) * k * grid.dt
        keep = np.isfinite(costs) & (costs <= cap)
        if k == 1:
            keep |= d == 0
        moves.extend((k, int(a), float(c)) for a, c in zip(d[keep], costs[keep]))
    return moves


class _Layers:
    """Ring buffer of the ``span + 1`` time layers that can still receive moves."""

    def __init__(self, grid: DpGrid, n_b: int):
        self.slots = grid.span + 1
        shape = (self.slots, grid.n_h + 1, n_b)
        self.cost = np.full(shape, np.inf)
        self.area = np.zeros(shape)
        bin_type = np.int16 if n_b < np.iinfo(np.int16).max else np.int32
        self.back_move = np.full((grid.n_t + 1, grid.n_h + 1, n_b), -1, dtype=np.int32)
        self.back_bin = np.zeros((grid.n_t + 1, grid.n_h + 1, n_b), dtype=bin_type)

    def __getitem__(self, t: int) -> Tuple[np.ndarray, np.ndarray]:
        slot = t % self.slots
        return self.cost[slot], self.area[slot]

    def recycle(self, t: int):
        slot = t % self.slots
        self.cost[slot] = np.inf
        self.area[slot] = 0.0


def _push(layers: _Layers, t: int, k: int, moves, sources, grid: DpGrid, bins: Tuple[float, int], cap: float):
    """Relax every k-step move out of the alive cells of layer t."""
    e0, n_b = bins
    cost, area = layers[t + k]
    cost, area = cost.reshape(-1), area.reshape(-1)
    back_move = layers.back_move[t + k].reshape(-1)
    back_bin = layers.back_bin[t + k].reshape(-1)
    unit = k * grid.dt * grid.dh
    for idx, d, c in moves:
        # cells two bins apart never collide, so each parity class is a clean scatter.
        for js, ms, c0, a0 in sources:
            j1 = js + d
            step = np.where(js == 0, 0.0, c) if (k == 1 and d == 0) else c
            cand = c0 + step
            new_area = a0 + unit * (js + 0.5 * d)
            nb = np.floor((new_area - e0) / grid.da).astype(np.int64)
            ok = (j1 >= 0) & (j1 <= grid.n_h) & (cand <= cap) & (nb < n_b)
            if not ok.any():
                continue
            flat = j1[ok] * n_b + nb[ok]
            cand, new_area, src = cand[ok], new_area[ok], ms[ok]
            better = cand < cost[flat]
            flat = flat[better]
            cost[flat] = cand[better]
            area[flat] = new_area[better]
            back_move[flat] = idx
            back_bin[flat] = src[better]


def _search(model: IncrementModel, z: float, grid: DpGrid, cap: float, workers: int) -> DpSolution:
    da = grid.da
    lower = z - 0.5 * da
    target = math.ceil(lower / da)
    # left edge of bin 0, in (−Δa, 0].
    e0 = min(lower - target * da, 0.0)
    n_b = int(math.floor((grid.a_max - e0) / da)) + 1
    if target >= n_b:
        raise InfeasibleAreaError(f"the window around z={z} lies beyond a_max={grid.a_max}.", z=z)
    moves = _moves(model, grid, cap)
    by_span = {k: [(i, d, c) for i, (kk, d, c) in enumerate(moves) if kk == k] for k in range(1, grid.span + 1)}
    logger.info(
        "DP search z=%s: %s levels, %s area bins, %s moves, slope step %s, cost cap %s",
        z,
        grid.n_h + 1,
        n_b,
        len(moves),
        grid.slope_step,
        cap,
    )
    layers = _Layers(grid, n_b)
    origin = int(math.floor(-e0 / da))
    layers[0][0][0, origin] = 0.0
    with ThreadPoolExecutor(max_workers=max(1, min(workers, grid.span))) as pool:
        for t in tqdm(range(grid.n_t), desc="dp", disable=not config.show_progress):
            cost, area = layers[t]
            js, ms = np.nonzero(np.isfinite(cost) & (cost <= cap))
            if js.size:
                c0, a0 = cost[js, ms], area[js, ms]
                sources = [
                    (js[p], ms[p], c0[p], a0[p]) for p in (ms % 2 == 0, ms % 2 == 1) if p.any()
                ]
                spans = [k for k in range(1, grid.span + 1) if t + k <= grid.n_t and by_span[k]]
                # each span writes its own destination layer.
                list(
                    pool.map(
                        lambda k: _push(layers, t, k, by_span[k], sources, grid, (e0, n_b), cap),
                        spans,
                    )
                )
            layers.recycle(t)

    final_cost, final_area = layers[grid.n_t]
    column = final_cost[:, target]
    if not np.isfinite(column).any():
        raise InfeasibleAreaError(f"no lattice path reaches the area window around z={z}.", z=z)
    j = int(np.argmin(column))
    best, path_area = float(column[j]), float(final_area[j, target])

    t, m = grid.n_t, target
    segments = []
    while t > 0:
        idx = int(layers.back_move[t, j, m])
        if idx < 0:
            raise RuntimeError("DP backtrack hit an unreached cell.")
        k, d, _ = moves[idx]
        m = int(layers.back_bin[t, j, m])
        segments.append((k, d))
        t, j = t - k, j - d
    if j != 0 or m != origin:
        raise RuntimeError("DP backtrack did not return to the origin.")
    segments = _earliest_start(segments[::-1])
    return _solution(z, best, segments, path_area, grid, capped=math.isfinite(cap))


def _earliest_start(segments: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Move the initial stay at zero of a path that ends at zero to its end.

    Both orders have the same cost and area; the canonical one starts its
    excursion at t=0.
    """
    if sum(d for _, d in segments) != 0:
        return segments
    lead = 0
    while lead < len(segments) and segments[lead][1] == 0:
        lead += 1
    return segments[lead:] + segments[:lead]


def _solution(z, cost, segments, area, grid: DpGrid, capped) -> DpSolution:
    knots_t, knots_j = [0], [0]
    for k, d in segments:
        knots_t.append(knots_t[-1] + k)
        knots_j.append(knots_j[-1] + d)
    levels = np.interp(np.arange(grid.n_t + 1), knots_t, knots_j)
    # segments between the first departure from zero and the end of the path.
    moving = [i for i, (k, d) in enumerate(segments) if not (d == 0 and knots_j[i] == 0)]
    defect, terminal = 0.0, None
    if moving:
        first, last = moving[0], moving[-1]
        slopes = [d / k for k, d in segments[first : last + 1]]
        if len(slopes) > 1:
            defect = max(float(np.max(np.diff(slopes))), 0.0)
        k, d = segments[last]
        if knots_j[last + 1] == 0 and d < 0:
            terminal = d / k * grid.slope_step
    return DpSolution(
        z=z,
        cost=cost,
        path=(levels * grid.dh).tolist(),
        area=area,
        grid=grid,
        segments=segments,
        concavity_defect=defect,
        terminal_slope=terminal,
        capped=capped,
    )


def dp_solve(
    model: IncrementModel,
    z: float,
    grid: DpGrid,
    workers: int = 1,
    cost_cap: Optional[float] = None,
) -> DpSolution:
    """Cheapest lattice path from height 0 whose trapezoidal area is within Δa/2 of z.

    Args:
        cost_cap: prune states and moves costing more than this. Defaults to
            twice the tent-path upper bound; the search is repeated without a
            cap if the capped search finds nothing.
    """
    if not z >= 0:
        raise ModelConfigError(f"target area must be nonnegative (got {z}).")
    grid.check(model, z)
    if z == 0:
        return _solution(0.0, 0.0, [(1, 0)] * grid.n_t, 0.0, grid, capped=False)
    cap = 2 * tent_upper_bound(model, z) if cost_cap is None else cost_cap
    try:
        return _search(model, z, grid, cap, workers)
    except InfeasibleAreaError:
        if math.isinf(cap):
            raise
        logger.warning("Capped DP search found no path (cap=%s); retrying without a cap.", cap)
        return _search(model, z, grid, math.inf, workers)


def compare(
    model: IncrementModel,
    z: float,
    grid: DpGrid,
    workers: int = 1,
    solver: SolverConfig = DEFAULT_SOLVER_CONFIG,
) -> CompareReport:
    analytic = float(solve_path(model, z, solver).rate_value)
    solution = dp_solve(model, z, grid, workers=workers)
    rel_gap = (solution.cost - analytic) / max(analytic, 1e-12)
    logger.info("DP vs analytic at z=%s: dp=%s analytic=%s rel_gap=%s", z, solution.cost, analytic, rel_gap)
    return CompareReport(z=z, analytic=analytic, dp=solution.cost, rel_gap=rel_gap, grid=grid, solution=solution)
