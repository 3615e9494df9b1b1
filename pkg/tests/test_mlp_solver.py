import math

import numpy as np
import pytest
from pydantic import ValidationError

from rrwmean import (
    BernoulliPM1,
    Gaussian,
    InfeasibleTargetError,
    PoissonBatch,
    ShiftedExponential,
    SolverConfig,
    check_optimality,
    eval_path,
    evaluate_functional,
    rate_curve,
    rate_function,
    solve_path,
)
from rrwmean.config import BRENTQ_MIN_RTOL
from rrwmean.mlp_solver import clip_gap

GAUSS = Gaussian(delta=1, sigma2=1)


def gaussian_rate(z: float, delta: float = 1.0, sigma2: float = 1.0) -> float:
    if z <= delta / 6:
        return 4 * delta / sigma2 * math.sqrt(z * delta / 6)
    return 1.5 / sigma2 * (z + delta / 2) ** 2


def gaussian_shape(z: float, t: np.ndarray, delta: float = 1.0, sigma2: float = 1.0) -> np.ndarray:
    if z <= delta / 6:
        T = math.sqrt(6 * z / delta)
        return np.where(t <= T, delta * t * (1 - t / T), 0.0)
    lam = 3 * (z + delta / 2) / sigma2
    return sigma2 * lam * (t - t * t / 2) - delta * t


def test_gaussian_closed_form():
    t = np.linspace(0, 1, 1001)
    for z in np.linspace(0.02, 1.0, 50):
        path = solve_path(GAUSS, z)
        assert float(path.rate_value) == pytest.approx(gaussian_rate(z), rel=1e-10)
        assert np.max(np.abs(path.evaluate(t) - gaussian_shape(z, t))) < 1e-10


def test_gaussian_branches_meet():
    z = 1 / 6
    assert float(solve_path(GAUSS, z).rate_value) == pytest.approx(2 / 3, abs=1e-12)
    assert float(solve_path(GAUSS, z * (1 - 1e-13)).rate_value) == pytest.approx(2 / 3, abs=1e-12)
    assert float(solve_path(GAUSS, z * (1 + 1e-13)).rate_value) == pytest.approx(2 / 3, abs=1e-12)


def test_gaussian_examples():
    full = solve_path(GAUSS, 1 / 6)
    assert full.t0 == 0 and full.t1 == pytest.approx(1.0)
    assert full.jump == 0 and full.endpoint == pytest.approx(0.0, abs=1e-12)
    assert float(eval_path(full, GAUSS, 0.5)) == pytest.approx(0.25, abs=1e-12)
    short = solve_path(GAUSS, 1 / 24)
    assert short.t1 - short.t0 == pytest.approx(0.5)
    assert float(short.rate_value) == pytest.approx(1 / 3)
    assert short.feasible_start == pytest.approx((0.0, 0.5))
    high = solve_path(GAUSS, 1 / 3)
    assert high.endpoint > 0


@pytest.mark.parametrize("z", [1 / 96, 1 / 24])
def test_square_root_scaling(z):
    ratio = float(solve_path(GAUSS, 4 * z).rate_value) / float(solve_path(GAUSS, z).rate_value)
    assert ratio == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize(
    "model",
    [GAUSS, PoissonBatch(alpha=0.5, mu=1), ShiftedExponential(alpha=2, mu=1), BernoulliPM1(alpha=1 / 3)],
)
def test_zero_target(model):
    path = solve_path(model, 0)
    assert path.rate_value == 0
    assert path.branch == "zero"
    assert np.all(path.evaluate(np.linspace(0, 1, 11)) == 0)


def test_bernoulli_endpoints():
    model = BernoulliPM1(alpha=1 / 3)
    path = solve_path(model, 0.5)
    assert path.branch == "cap"
    assert float(path.rate_value) == pytest.approx(math.log(3), abs=1e-12)
    t = np.linspace(0, 1, 101)
    np.testing.assert_allclose(path.evaluate(t), t, atol=1e-12)
    with pytest.raises(InfeasibleTargetError) as info:
        solve_path(model, 0.6)
    assert info.value.rate_value.is_inf
    assert rate_function(model, 0.6).is_inf


OPTIMALITY_CASES = [
    (GAUSS, [0.02, 0.1, 1 / 6, 0.3, 0.8]),
    (PoissonBatch(alpha=0.5, mu=1), [0.05, 0.2, 0.5, 1.0, 2.0]),
    (ShiftedExponential(alpha=2, mu=1), [0.1, 0.5, 1.0, 2.0, 3.0]),
    (BernoulliPM1(alpha=1 / 3), [0.03, 0.1, 0.2, 0.35, 0.45]),
]


@pytest.mark.parametrize("model,zs", OPTIMALITY_CASES)
def test_euler_lagrange_residuals(model, zs):
    for z in zs:
        path = solve_path(model, z)
        report = check_optimality(model, path)
        assert report.max_residual() <= 1e-8, (z, report)
        assert path.t0 <= path.t00 <= path.t1 <= 1
        if path.t1 < 1:
            assert float(path.evaluate(path.t1)) == pytest.approx(0.0, abs=1e-10)


def test_optimality_of_gaussian_closed_form():
    path = solve_path(GAUSS, 1 / 6)
    report = check_optimality(GAUSS, path)
    assert report.el_residual < 1e-12
    assert report.terminal_residual < 1e-12
    assert report.area_residual < 1e-12
    perturbed = check_optimality(GAUSS, path, slope=lambda t: path.slope(t) + 1e-3 * math.pi * np.cos(math.pi * t))
    assert perturbed.el_residual > 1e-4


def test_optimality_of_cap_path():
    model = BernoulliPM1(alpha=1 / 3)
    report = check_optimality(model, solve_path(model, 0.5))
    assert report.el_residual is None
    assert report.area_residual < 1e-12


def test_eval_path_off_support():
    path = solve_path(GAUSS, 1 / 24)
    assert float(eval_path(path, GAUSS, path.t1)) == pytest.approx(0.0, abs=1e-12)
    moved = path.shifted(0.3)
    assert float(moved.evaluate(0.1)) == 0
    assert float(moved.evaluate(0.55)) == pytest.approx(float(path.evaluate(0.25)), abs=1e-12)
    with pytest.raises(ValueError):
        path.shifted(0.7)


def test_evaluate_functional():
    assert evaluate_functional(GAUSS, np.zeros(101)) == 0
    t = np.linspace(0, 1, 10_001)
    assert float(evaluate_functional(GAUSS, t - t * t)) == pytest.approx(2 / 3, abs=1e-3)
    assert evaluate_functional(BernoulliPM1(alpha=1 / 3), 2 * t).is_inf
    shifted = ShiftedExponential(alpha=2, mu=1)
    # a jump of 0.5 costs θ↑·0.5 and the flat part costs I(0) = 1 − log 2.
    expected = 0.5 * 2 + (1 - math.log(2))
    assert float(evaluate_functional(shifted, np.zeros(11), jump_up=0.5)) == pytest.approx(expected)
    assert evaluate_functional(GAUSS, np.zeros(11), jump_up=0.5).is_inf


def test_translation_invariance():
    path = solve_path(GAUSS, 1 / 24)
    base = float(evaluate_functional(GAUSS, path.samples(10_001)[1]))
    for start in (0.1, 0.25, 0.5):
        _, psi = path.shifted(start).samples(10_001)
        assert float(evaluate_functional(GAUSS, psi)) == pytest.approx(base, abs=1e-3)


@pytest.mark.parametrize(
    "model,z", [(GAUSS, 0.3), (PoissonBatch(alpha=0.5, mu=1), 0.5), (BernoulliPM1(alpha=1 / 3), 0.2)]
)
def test_sampled_functional_converges(model, z):
    path = solve_path(model, z)
    _, psi = path.samples(10_001)
    value = float(evaluate_functional(model, psi))
    assert value == pytest.approx(float(path.rate_value), rel=1e-3)


@pytest.mark.parametrize("model,z", [(PoissonBatch(alpha=0.5, mu=1), 0.5), (GAUSS, 0.05)])
def test_path_is_concave_on_smooth_segment(model, z):
    path = solve_path(model, z)
    rng = np.random.default_rng(1)
    a, b = np.sort(rng.uniform(path.t00, path.t1, (2, 1000)), axis=0)
    mid = path.evaluate((a + b) / 2)
    assert np.all(mid >= (path.evaluate(a) + path.evaluate(b)) / 2 - 1e-10)


@pytest.mark.parametrize("d", [0.01, 0.05])
def test_clipping_never_helps(d):
    model = PoissonBatch(alpha=0.5, mu=1)
    assert clip_gap(model, solve_path(model, 0.5), d) <= 1e-4


def test_shifted_exponential_has_no_jump():
    model = ShiftedExponential(alpha=2, mu=1)
    path = solve_path(model, 3.0)
    assert path.jump_searched
    assert path.jump == 0
    assert path.branch == "full"


def test_gaussian_rate_curve_transition():
    curve = rate_curve(GAUSS, np.linspace(0, 0.5, 51))
    rates = [float(p.rate_value) for p in curve.points]
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    assert len(curve.transitions) == 1
    assert curve.transitions[0].kind == "t1<1"
    assert curve.transitions[0].z_est == pytest.approx(1 / 6, abs=1e-4)


@pytest.mark.parametrize("alpha,onset", [(0.3, 0.0682), (1 / 3, 0.0564)])
def test_bernoulli_full_horizon_onset(alpha, onset):
    curve = rate_curve(BernoulliPM1(alpha=alpha), np.linspace(0.04, 0.1, 7))
    found = [tr for tr in curve.transitions if "t1<1" in tr.kind]
    assert len(found) == 1
    assert found[0].z_est == pytest.approx(onset, abs=0.002)


def test_rate_curve_keeps_infeasible_points():
    curve = rate_curve(BernoulliPM1(alpha=1 / 3), [0.3, 0.5, 0.6])
    assert float(curve.points[1].rate_value) == pytest.approx(math.log(3))
    assert curve.points[2].rate_value.is_inf
    assert curve.points[2].error == "infeasible"


def test_shifted_exponential_asymptotic_slope():
    model = ShiftedExponential(alpha=2, mu=1)
    curve = rate_curve(model, [9.95, 10.05])
    slope = (float(curve.points[1].rate_value) - float(curve.points[0].rate_value)) / 0.1
    assert slope == pytest.approx(2.0, rel=0.02)
    assert all(p.path.jump == 0 for p in curve.points)


def test_rate_curve_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        rate_curve(GAUSS, [0.2, 0.1])


def test_solver_config_rtol_bound():
    with pytest.raises(ValidationError):
        SolverConfig(root_rtol=1e-16)
    assert SolverConfig().root_rtol >= BRENTQ_MIN_RTOL
    tight = SolverConfig(root_rtol=BRENTQ_MIN_RTOL)
    for model, z in [
        (PoissonBatch(alpha=0.5, mu=1), 0.5),
        (ShiftedExponential(alpha=2, mu=1), 1.0),
        (BernoulliPM1(alpha=1 / 3), 0.2),
    ]:
        path = solve_path(model, z, tight)
        assert check_optimality(model, path, solver=tight).area_residual < 1e-9


def test_shifted_exponential_large_targets_stay_jump_free():
    model = ShiftedExponential(alpha=2, mu=1)
    rates = []
    for z in (9.95, 10.0, 10.05):
        path = solve_path(model, z)
        assert path.jump == 0
        assert path.branch == "full"
        rates.append(float(path.rate_value))
    np.testing.assert_allclose(np.diff(rates), 2 * 0.05, rtol=0.02)


RATE_CURVE_GRIDS = [
    (GAUSS, np.linspace(0, 1, 41)),
    (PoissonBatch(alpha=0.5, mu=1), np.linspace(0, 2, 41)),
    (ShiftedExponential(alpha=2, mu=1), np.linspace(0, 5, 41)),
    (BernoulliPM1(alpha=1 / 3), np.append(np.linspace(0, 0.45, 19), 0.5)),
]


@pytest.mark.parametrize("model,zs", RATE_CURVE_GRIDS)
def test_rate_curve_is_monotone_without_jumps(model, zs):
    curve = rate_curve(model, zs)
    assert all(p.error is None for p in curve.points)
    rates = np.array([float(p.rate_value) for p in curve.points])
    assert rates[0] == 0
    steps = np.diff(rates)
    assert np.all(steps >= -1e-9)
    # the rate function is continuous: steps shrink with the grid spacing.
    assert np.all(np.abs(steps) <= 5 * np.sqrt(np.diff(zs)))
