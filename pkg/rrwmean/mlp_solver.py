"""Most likely paths and the rate function of the time-averaged reflected walk.

The optimizer of the area-constrained problem is, on its smooth segment,
ψ̇(t) = ∇I⁻¹(λ·(t1 − t)). With v = t1 − t this turns every quantity into
the segment integrals ``IncrementModel.segment_integrals`` (G1, G2, C):

    endpoint  c = h0 + G1(λ, L)
    area      z = prefix area + h0·L + G2(λ, L)
    cost        = prefix cost + C(λ, L)

where L = t1 − t00 and h0 is the height reached after the jump and the
rate-capped prefix. The two regimes are the full horizon (t1 = 1, c ≥ 0)
and the interior excursion (t1 < 1, c = 0).
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.optimize import brentq, minimize_scalar
from tqdm import tqdm

from rrwmean import logger

from .common import (
    ExtendedReal,
    InfeasibleTargetError,
    ModelConfigError,
    SolverConvergenceError,
    gauss_legendre,
    solve_increasing,
)
from .config import DEFAULT_SOLVER_CONFIG, SolverConfig, config
from .increments import Gaussian, IncrementModel

BranchName = Literal["zero", "excursion", "full", "cap"]


class PathSummary(BaseModel):
    t0: float
    t00: float
    t1: float
    jump: float
    lambda_star: Optional[float]
    endpoint: float
    branch: BranchName
    flat_t00: bool = False


class MostLikelyPath(BaseModel):
    """Parametric most likely path ψ* for target area z."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: IncrementModel
    z: float = Field(ge=0)
    t0: float = 0.0
    t00: float = 0.0
    t1: float = 0.0
    jump: float = Field(default=0.0, ge=0)
    lambda_star: Optional[float] = None
    endpoint: float = Field(default=0.0, ge=0)
    rate_value: ExtendedReal = ExtendedReal()
    branch: BranchName = "zero"
    # T₀⁰ search found costs equal within the flat tolerance.
    flat_t00: bool = False
    # the jump height was optimized (θ↑ < ∞).
    jump_searched: bool = False
    # excursion starts giving the same cost: [0, 1 - (t1 - t0)].
    feasible_start: Tuple[float, float] = (0.0, 0.0)

    @property
    def b(self) -> Optional[float]:
        """Intercept of the gradient line ∇I(ψ̇(t)) = b − λ*·t."""
        if self.lambda_star is None:
            return None
        return self.lambda_star * self.t1

    @property
    def cap_slope(self) -> float:
        return self.model.r_bar.value if self.t00 > self.t0 else 0.0

    @property
    def start_height(self) -> float:
        """Height at the beginning of the smooth segment."""
        return self.jump + self.cap_slope * (self.t00 - self.t0)

    @property
    def prefix_area(self) -> float:
        d = self.t00 - self.t0
        return self.jump * d + 0.5 * self.cap_slope * d * d

    def slope(self, t) -> np.ndarray:
        """Left derivative ψ̇(t); 0 off the excursion."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if self.branch == "zero":
            return out
        cap = (t > self.t0) & (t <= self.t00)
        out = np.where(cap, self.cap_slope, out)
        if self.lambda_star is not None and self.t1 > self.t00:
            smooth = (t > self.t00) & (t <= self.t1)
            lam_arg = np.where(smooth, self.lambda_star * (self.t1 - t), 0.0)
            out = np.where(smooth, self.model.inv_grad_values(lam_arg), out)
        return out

    def evaluate(self, t) -> np.ndarray:
        """ψ*(t) for scalar or array t."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if self.branch == "zero":
            return out
        pre = (t >= self.t0) & (t <= self.t00)
        out = np.where(pre, self.jump + self.cap_slope * (t - self.t0), out)
        if self.lambda_star is not None and self.t1 > self.t00:
            lam, L = self.lambda_star, self.t1 - self.t00
            smooth = (t > self.t00) & (t <= self.t1)
            if np.any(smooth):
                # anchored at t1, where the solver fixed the height.
                rest = np.clip(self.t1 - t[smooth], 0.0, L)
                values = self.endpoint - self.model.g1_values(lam, rest)
                out = out.copy()
                out[smooth] = values
        return np.maximum(out, 0.0)

    def __call__(self, t) -> np.ndarray:
        return self.evaluate(t)

    def samples(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        t = np.linspace(0.0, 1.0, n)
        return t, self.evaluate(t)

    def area(self, tol: float = 1e-11) -> float:
        """Area under ψ*, with the smooth part integrated by quadrature."""
        if self.branch == "zero":
            return 0.0
        return self.prefix_area + gauss_legendre(self.evaluate, self.t00, self.t1, tol)

    def max_height(self) -> float:
        if self.branch == "zero":
            return 0.0
        candidates = [self.t00, self.t1]
        if self.lambda_star:
            # slope changes sign where λ*(t1 − t) = ∇I(0).
            peak = self.t1 - self.model.grad_rate(0.0) / self.lambda_star
            if self.t00 < peak < self.t1:
                candidates.append(peak)
        return float(np.max(self.evaluate(np.array(candidates))))

    def shifted(self, start: float) -> "MostLikelyPath":
        """The same excursion started at ``start`` (translation family only)."""
        lo, hi = self.feasible_start
        if not lo - 1e-12 <= start <= hi + 1e-12:
            raise ValueError(f"start {start} outside feasible interval [{lo}, {hi}].")
        d = start - self.t0
        return self.model_copy(
            update={"t0": self.t0 + d, "t00": self.t00 + d, "t1": min(self.t1 + d, 1.0)}
        )

    def summary(self) -> PathSummary:
        return PathSummary(
            t0=self.t0,
            t00=self.t00,
            t1=self.t1,
            jump=self.jump,
            lambda_star=self.lambda_star,
            endpoint=self.endpoint,
            branch=self.branch,
            flat_t00=self.flat_t00,
        )


def eval_path(path: MostLikelyPath, model: IncrementModel, t) -> np.ndarray:
    """ψ*(t); ``model`` must be the model the path was solved for."""
    if model is not path.model and model != path.model:
        raise ValueError("path was solved for a different model.")
    return path.evaluate(t)


@dataclass
class _Candidate:
    cost: float
    lam: float
    length: float
    t00: float
    jump: float
    endpoint: float
    branch: str


def _root(f: Callable[[float], float], lo: float, sup: float, solver: SolverConfig, what: str) -> float:
    return solve_increasing(
        f,
        lo,
        sup,
        xtol=solver.root_xtol,
        rtol=solver.root_rtol,
        maxiter=solver.root_maxiter,
        doublings=solver.bracket_doublings,
        what=what,
    )


def _solve_fixed(
    model: IncrementModel, z: float, jump: float, t00: float, solver: SolverConfig
) -> Optional[_Candidate]:
    """Optimal smooth segment for a given jump height and capped-prefix length.

    Returns None when no path with this prefix has area z.
    """
    delta, floor, tol = model.delta, solver.lambda_floor, solver.quad_tol
    rbar = model.r_bar.value if t00 > 0 else 0.0
    h0 = jump + rbar * t00
    prefix_area = jump * t00 + 0.5 * rbar * t00 * t00
    prefix_cost = 0.0
    if t00 > 0:
        prefix_cost += float(model.rate_at_cap) * t00
    if jump > 0:
        prefix_cost += float(model.theta_up) * jump
    L_full = 1.0 - t00
    if L_full <= 0:
        return None

    # roots are taken in the model's root variable u, with λ = model.multiplier(u, L).
    u_lo, u_sup = model.multiplier_range(L_full, floor)

    def full_excess(u: float) -> float:
        return prefix_area + h0 * L_full + model.segment_at(u, L_full, tol)[2] - z

    full_lo = u_lo
    if h0 < delta * L_full:
        u_seam = _root(lambda u: h0 + model.g1_at(u, L_full), u_lo, u_sup, solver, "seam multiplier")
        seam_excess = full_excess(u_seam)
        if seam_excess >= 0:
            return _solve_excursion(model, z, jump, t00, h0, prefix_area, prefix_cost, seam_excess, solver)
        full_lo = u_seam
    elif full_excess(u_lo) >= 0:
        return None

    u = _root(full_excess, full_lo, u_sup, solver, "multiplier")
    lam, g1_val, _, cost = model.segment_at(u, L_full, tol)
    return _Candidate(
        cost=prefix_cost + cost,
        lam=lam,
        length=L_full,
        t00=t00,
        jump=jump,
        endpoint=max(h0 + g1_val, 0.0),
        branch="full",
    )


def _solve_excursion(
    model: IncrementModel,
    z: float,
    jump: float,
    t00: float,
    h0: float,
    prefix_area: float,
    prefix_cost: float,
    seam_excess: float,
    solver: SolverConfig,
) -> Optional[_Candidate]:
    """Excursion returning to zero before t=1; the length L is pinned by the area."""
    delta, floor, tol = model.delta, solver.lambda_floor, solver.quad_tol
    L_full = 1.0 - t00
    L_min = h0 / delta
    if z < prefix_area + h0 * h0 / (2 * delta):
        return None

    def u_of(L: float) -> float:
        return _root(
            lambda u: h0 + model.g1_at(u, L),
            *model.multiplier_range(L, floor),
            solver,
            "excursion multiplier",
        )

    def excess(L: float) -> float:
        return prefix_area + h0 * L + model.segment_at(u_of(L), L, tol)[2] - z

    L_lo = L_min + 1e-8 * L_full
    if seam_excess == 0:
        L = L_full
    else:
        try:
            lo_excess = excess(L_lo)
        except SolverConvergenceError:
            lo_excess = prefix_area + h0 * h0 / (2 * delta) - z
        if lo_excess >= 0:
            L = L_lo
        else:
            L = brentq(
                excess,
                L_lo,
                L_full,
                xtol=solver.root_xtol,
                rtol=solver.root_rtol,
                maxiter=solver.root_maxiter,
            )
    lam, _, _, cost = model.segment_at(u_of(L), L, tol)
    return _Candidate(
        cost=prefix_cost + cost,
        lam=lam,
        length=L,
        t00=t00,
        jump=jump,
        endpoint=0.0,
        branch="excursion",
    )


def _safe_cost(model, z, jump, t00, solver) -> Tuple[float, Optional[_Candidate]]:
    try:
        cand = _solve_fixed(model, z, jump, t00, solver)
    except SolverConvergenceError as e:
        logger.debug("Inner solve failed (jump=%s, t00=%s): %s", jump, t00, e)
        return math.inf, None
    return (cand.cost, cand) if cand is not None else (math.inf, None)


def _solve_with_jump(model: IncrementModel, z: float, solver: SolverConfig) -> _Candidate:
    """Outer minimization over the jump height a for θ↑ < ∞."""
    delta = model.delta
    # largest jump that still admits a path of area z.
    a_cap = math.sqrt(2 * delta * z) if z <= delta / 2 else z + delta / 2
    best_cost, best = _safe_cost(model, z, 0.0, 0.0, solver)
    a_max = min(z, a_cap)
    while True:
        res = minimize_scalar(
            lambda a: min(_safe_cost(model, z, a, 0.0, solver)[0], 1e300),
            bounds=(0.0, a_max),
            method="bounded",
            options={"xatol": solver.jump_xatol},
        )
        if res.x > a_max - 10 * solver.jump_xatol and a_max < a_cap:
            a_max = min(2 * a_max, a_cap)
            logger.debug("Jump minimizer at boundary, expanding a_max to %s", a_max)
            continue
        break
    cost, cand = _safe_cost(model, z, float(res.x), 0.0, solver)
    if cand is not None and cost < best_cost - solver.flat_tol:
        logger.info("Jump regime: a=%s beats a=0 (%s < %s)", res.x, cost, best_cost)
        best_cost, best = cost, cand
    if best is None:
        raise SolverConvergenceError("no admissible jump height found.", {"z": z, "a_cap": a_cap})
    return best


def _min_area_with_prefix(model: IncrementModel, t00: float) -> float:
    """Smallest area of any admissible path whose capped prefix lasts t00."""
    rbar, delta = model.r_bar.value, model.delta
    h0, L = rbar * t00, 1.0 - t00
    pre = 0.5 * rbar * t00 * t00
    if h0 <= delta * L:
        return pre + h0 * h0 / (2 * delta)
    return pre + h0 * L - 0.5 * delta * L * L


def _solve_noncoercive(model: IncrementModel, z: float, solver: SolverConfig) -> Tuple[_Candidate, bool]:
    """Outer search over the capped-prefix length T₀⁰."""
    rbar = model.r_bar.value
    t_hi = brentq(lambda t: _min_area_with_prefix(model, t) - z, 0.0, 1.0, xtol=1e-14)
    t_hi = min(t_hi, z / rbar) * (1 - 1e-9)
    c0, cand0 = _safe_cost(model, z, 0.0, 0.0, solver)
    grid = np.linspace(0.0, t_hi, 9)
    costs = [c0] + [_safe_cost(model, z, 0.0, float(t), solver)[0] for t in grid[1:]]
    k = int(np.argmin(costs))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    if hi - lo > solver.t00_xatol:
        res = minimize_scalar(
            lambda t: min(_safe_cost(model, z, 0.0, t, solver)[0], 1e300),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": solver.t00_xatol},
        )
        t_star = float(res.x)
    else:
        t_star = float(grid[k])
    c_star, cand_star = _safe_cost(model, z, 0.0, t_star, solver)
    if costs[k] < c_star:
        t_star = float(grid[k])
        c_star, cand_star = _safe_cost(model, z, 0.0, t_star, solver)
    flat = t_star > solver.t00_xatol and abs(c_star - c0) <= solver.flat_tol
    if flat:
        logger.warning(
            "T00 search is numerically flat at z=%s (cost %s at t00=0, %s at t00=%s); reporting t00=0.",
            z,
            c0,
            c_star,
            t_star,
        )
    if cand_star is not None and c_star < c0 - solver.flat_tol:
        return cand_star, False
    if cand0 is None:
        raise SolverConvergenceError("no admissible capped prefix found.", {"z": z, "t00_max": t_hi})
    return cand0, flat


def _solve_gaussian(model: Gaussian, z: float) -> MostLikelyPath:
    d, s2 = model.delta, model.sigma2
    if z < d / 6:
        T = math.sqrt(6 * z / d)
        return MostLikelyPath(
            model=model,
            z=z,
            t1=T,
            lambda_star=2 * d / (s2 * T),
            rate_value=ExtendedReal.of((4 * d / s2) * math.sqrt(z * d / 6)),
            branch="excursion",
            feasible_start=(0.0, 1.0 - T),
        )
    return MostLikelyPath(
        model=model,
        z=z,
        t1=1.0,
        lambda_star=3 * (z + d / 2) / s2,
        endpoint=max(1.5 * z - d / 4, 0.0),
        rate_value=ExtendedReal.of(1.5 / s2 * (z + d / 2) ** 2),
        branch="full",
    )


def solve_path(
    model: IncrementModel, z: float, solver: SolverConfig = DEFAULT_SOLVER_CONFIG
) -> MostLikelyPath:
    """Most likely path of the reflected walk whose time-averaged area is z.

    Raises:
        InfeasibleTargetError: z exceeds the largest area a finite-cost path can have.
        SolverConvergenceError: a root could not be bracketed.
    """
    z = float(z)
    if not z >= 0 or math.isinf(z):
        raise ModelConfigError(f"target area must be a finite nonnegative number (got {z}).")
    if z == 0:
        return MostLikelyPath(model=model, z=0.0, feasible_start=(0.0, 1.0))
    max_area = model.max_area
    if z > max_area + 1e-12:
        raise InfeasibleTargetError(
            f"z={z} exceeds the maximal achievable area {max_area} for {model}.", z=z
        )
    if isinstance(model, Gaussian):
        return _solve_gaussian(model, z)
    flat = jump_searched = False
    if not model.coercive:
        if z >= max_area - 1e-12:
            return MostLikelyPath(
                model=model,
                z=z,
                t00=1.0,
                t1=1.0,
                endpoint=model.r_bar.value,
                rate_value=model.rate_at_cap,
                branch="cap",
            )
        cand, flat = _solve_noncoercive(model, z, solver)
    elif not model.theta_up.is_inf:
        cand = _solve_with_jump(model, z, solver)
        jump_searched = True
    else:
        cand = _solve_fixed(model, z, 0.0, 0.0, solver)
        if cand is None:
            raise SolverConvergenceError("no admissible path found.", {"z": z})
    t1 = cand.t00 + cand.length
    logger.info(
        "Solved %s z=%s: branch=%s lambda=%s t1=%s jump=%s rate=%s",
        model,
        z,
        cand.branch,
        cand.lam,
        t1,
        cand.jump,
        cand.cost,
    )
    return MostLikelyPath(
        model=model,
        z=z,
        t00=cand.t00,
        t1=min(t1, 1.0),
        jump=cand.jump,
        lambda_star=cand.lam,
        endpoint=cand.endpoint,
        rate_value=ExtendedReal.of(cand.cost),
        branch=cand.branch,
        flat_t00=flat,
        jump_searched=jump_searched,
        feasible_start=(0.0, 1.0 - t1) if cand.branch == "excursion" else (0.0, 0.0),
    )


def rate_function(
    model: IncrementModel, z: float, solver: SolverConfig = DEFAULT_SOLVER_CONFIG
) -> ExtendedReal:
    """I_W̄(z), with +inf for targets no finite-cost path reaches."""
    try:
        return solve_path(model, z, solver).rate_value
    except InfeasibleTargetError as e:
        return e.rate_value


def evaluate_functional(
    model: IncrementModel,
    samples: Sequence[float],
    jump_up: float = 0.0,
    jump_down: float = 0.0,
    jump_index: int = 0,
) -> ExtendedReal:
    """Rate functional J of a sampled path on a uniform grid over [0, 1].

    Args:
        samples: absolutely continuous part of the path at N uniform points.
        jump_up: upward jump total, added to the samples from ``jump_index`` on.
        jump_down: downward jump total.
    """
    psi = np.asarray(samples, dtype=float)
    if psi.size < 2:
        raise ValueError("need at least two samples.")
    dt = 1.0 / (psi.size - 1)
    full = psi.copy()
    full[jump_index:] += jump_up
    slopes = np.diff(psi) / dt
    positive = np.maximum(full[:-1], full[1:]) > 0
    costs = model.rate_values(slopes[positive])
    total = ExtendedReal.of(float(np.sum(costs)) * dt)
    if jump_up > 0:
        total = total + model.theta_up * jump_up
    if jump_down > 0:
        total = total + model.theta_down * jump_down
    return total


def clip_gap(model: IncrementModel, path: MostLikelyPath, d: float, n: int = 10_001) -> float:
    """J(max(0, ψ − d)) − J(ψ) on an n-point grid; nonpositive for an optimizer."""
    _, psi = path.samples(n)
    base = evaluate_functional(model, psi)
    clipped = evaluate_functional(model, np.maximum(psi - d, 0.0))
    return float(clipped) - float(base)


class OptimalityReport(BaseModel):
    el_residual: Optional[float] = None
    terminal_residual: Optional[float] = None
    area_residual: float
    endpoint_residual: Optional[float] = None
    points_checked: int = 0
    points_skipped: int = 0

    def max_residual(self) -> float:
        values = [self.el_residual, self.terminal_residual, self.area_residual, self.endpoint_residual]
        return max(v for v in values if v is not None)


def check_optimality(
    model: IncrementModel,
    path: MostLikelyPath,
    slope: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    solver: SolverConfig = DEFAULT_SOLVER_CONFIG,
) -> OptimalityReport:
    """Residuals of the Euler–Lagrange, terminal-slope, area and endpoint conditions.

    ``slope`` replaces the path's own slope in the gradient checks.
    """
    if path.rate_value.is_inf:
        raise ValueError("optimality is only defined for finite-rate paths.")
    slope = slope or path.slope
    report = {"area_residual": abs(path.area(solver.quad_tol) - path.z)}
    smooth = path.lambda_star is not None and path.t00 < path.t1
    if smooth:
        n = solver.el_points
        t = path.t00 + (path.t1 - path.t00) * (np.arange(n) + 0.5) / n
        s = np.asarray(slope(t), dtype=float)
        ok = model.in_open_domain(s, solver.edge_guard)
        residual = np.abs(model.grad_values(s[ok]) - path.lambda_star * (path.t1 - t[ok]))
        report["el_residual"] = float(np.max(residual)) if residual.size else 0.0
        report["points_checked"] = int(ok.sum())
        report["points_skipped"] = int(n - ok.sum())
        terminal = float(np.asarray(slope(np.array([path.t1])))[0])
        report["terminal_residual"] = abs(terminal + model.delta)
    if path.branch == "excursion":
        report["endpoint_residual"] = abs(float(path.evaluate(path.t1)))
    return OptimalityReport(**report)


# ---- rate curves ----


class RatePoint(BaseModel):
    z: float
    # None when the point failed to converge.
    rate_value: Optional[ExtendedReal] = None
    path: Optional[PathSummary] = None
    error: Optional[str] = None


class RegimeTransition(BaseModel):
    kind: str
    z_lo: float
    z_hi: float

    @property
    def z_est(self) -> float:
        return 0.5 * (self.z_lo + self.z_hi)


class RateCurve(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: IncrementModel
    points: List[RatePoint]
    transitions: List[RegimeTransition] = []

    @field_validator("points")
    @classmethod
    def _increasing(cls, points: List[RatePoint]) -> List[RatePoint]:
        zs = [p.z for p in points]
        if any(b <= a for a, b in zip(zs, zs[1:])):
            raise ValueError("z values must be strictly increasing.")
        return points


_SIGNATURE_NAMES = ("infinite", "t1<1", "jump", "t00>t0")


def _signature(point: RatePoint) -> Optional[Tuple[bool, bool, bool, bool]]:
    if point.rate_value is None:
        return None
    if point.rate_value.is_inf:
        return (True, False, False, False)
    p = point.path
    return (False, p.t1 < 1 - 1e-12, p.jump > 1e-9, p.t00 > p.t0 + 1e-9)


def _solve_point(args) -> RatePoint:
    model, z, solver = args
    try:
        path = solve_path(model, z, solver)
    except InfeasibleTargetError as e:
        return RatePoint(z=z, rate_value=e.rate_value, error="infeasible")
    except SolverConvergenceError as e:
        logger.error("Rate curve point z=%s failed: %s", z, e)
        return RatePoint(z=z, error=f"non-convergence: {e}")
    return RatePoint(z=z, rate_value=path.rate_value, path=path.summary())


def _locate_transition(model, lo: RatePoint, hi: RatePoint, solver: SolverConfig) -> RegimeTransition:
    sig_lo, sig_hi = _signature(lo), _signature(hi)
    kind = ",".join(name for name, a, b in zip(_SIGNATURE_NAMES, sig_lo, sig_hi) if a != b)
    z_lo, z_hi = lo.z, hi.z
    while z_hi - z_lo > solver.transition_tol:
        mid = _solve_point((model, 0.5 * (z_lo + z_hi), solver))
        sig = _signature(mid)
        if sig == sig_lo:
            z_lo = mid.z
        elif sig == sig_hi or sig is not None:
            z_hi = mid.z
        else:
            break
    logger.info("Regime transition (%s) located in [%s, %s]", kind, z_lo, z_hi)
    return RegimeTransition(kind=kind, z_lo=z_lo, z_hi=z_hi)


def rate_curve(
    model: IncrementModel,
    z_grid: Sequence[float],
    solver: SolverConfig = DEFAULT_SOLVER_CONFIG,
    workers: int = 1,
) -> RateCurve:
    """Solve every grid point and locate regime transitions between neighbours."""
    z_grid = [float(z) for z in z_grid]
    if any(z < 0 for z in z_grid):
        raise ModelConfigError("z values must be nonnegative.")
    if any(b <= a for a, b in zip(z_grid, z_grid[1:])):
        raise ModelConfigError("z values must be strictly increasing.")
    tasks = [(model, z, solver) for z in z_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_solve_point, tasks))
    else:
        points = [
            _solve_point(task)
            for task in tqdm(tasks, desc="rate curve", disable=not config.show_progress)
        ]
    finite = [p for p in points if p.rate_value is not None and not p.rate_value.is_inf]
    for lo, hi in zip(finite, finite[1:]):
        if float(hi.rate_value) < float(lo.rate_value) - solver.flat_tol:
            logger.warning(
                "Rate decreases between z=%s and z=%s (%s > %s).", lo.z, hi.z, lo.rate_value, hi.rate_value
            )
    transitions = []
    for lo, hi in zip(points, points[1:]):
        sig_lo, sig_hi = _signature(lo), _signature(hi)
        if sig_lo is None or sig_hi is None or sig_lo == sig_hi:
            continue
        transitions.append(_locate_transition(model, lo, hi, solver))
    return RateCurve(model=model, points=points, transitions=transitions)
