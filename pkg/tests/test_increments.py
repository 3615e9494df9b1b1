import math

import numpy as np
import pytest

from rrwmean import (
    BernoulliPM1,
    Custom,
    DomainError,
    ExtendedReal,
    Gaussian,
    ModelConfigError,
    PoissonBatch,
    ShiftedExponential,
    model_from_json,
)

MODELS = {
    "gaussian": Gaussian(delta=1, sigma2=1),
    "poisson_batch": PoissonBatch(alpha=0.5, mu=1),
    "shifted_exponential": ShiftedExponential(alpha=2, mu=1),
    "bernoulli": BernoulliPM1(alpha=0.3),
}

# interior points of each finiteness domain.
INTERIOR = {
    "gaussian": np.linspace(-3, 3, 41),
    "poisson_batch": np.linspace(-0.9, 4, 41),
    "shifted_exponential": np.linspace(-0.9, 4, 41),
    "bernoulli": np.linspace(-0.95, 0.95, 41),
}

# θ values with a finite cgf.
THETAS = {
    "gaussian": (-4, 4),
    "poisson_batch": (-3, 3),
    "shifted_exponential": (-5, 1.9),
    "bernoulli": (-4, 4),
}


def test_cgf_values():
    g = MODELS["gaussian"]
    assert g.cgf(0) == 0
    assert float(g.cgf(2)) == pytest.approx(0.0, abs=1e-15)
    assert g.cgf(3) == -3 + 4.5
    assert MODELS["shifted_exponential"].cgf(2).is_inf
    assert MODELS["shifted_exponential"].cgf(2.5).is_inf
    assert not MODELS["shifted_exponential"].cgf(1.99).is_inf


def test_rate_values():
    g = MODELS["gaussian"]
    assert g.rate(-1) == 0
    assert float(g.rate(0)) == pytest.approx(0.5)
    b = BernoulliPM1(alpha=1 / 3)
    assert float(b.rate(1)) == pytest.approx(math.log(3), rel=1e-14)
    assert b.rate(1.5).is_inf
    assert b.rate(-1.2).is_inf
    assert MODELS["poisson_batch"].rate(-1).is_inf
    assert MODELS["shifted_exponential"].rate(-1).is_inf
    assert isinstance(g.rate(0), ExtendedReal)


@pytest.mark.parametrize("family", MODELS)
def test_gradient_vanishes_at_drift(family):
    model = MODELS[family]
    assert model.grad_rate(-model.delta) == pytest.approx(0.0, abs=1e-12)
    assert model.inv_grad(0.0) == pytest.approx(-model.delta, abs=1e-12)
    assert float(model.rate(-model.delta)) == pytest.approx(0.0, abs=1e-14)


def test_gradient_values():
    assert MODELS["poisson_batch"].grad_rate(0) == pytest.approx(math.log(2))
    assert BernoulliPM1(alpha=1 / 3).grad_rate(0) == pytest.approx(0.5 * math.log(2))
    assert MODELS["gaussian"].inv_grad(2) == pytest.approx(1.0)
    assert BernoulliPM1(alpha=1 / 3).inv_grad(40.0) == pytest.approx(1.0, abs=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        MODELS["bernoulli"].grad_rate(1.0)
    with pytest.raises(DomainError):
        MODELS["poisson_batch"].grad_rate(-1.0)
    with pytest.raises(DomainError):
        MODELS["shifted_exponential"].inv_grad(2.0)


@pytest.mark.parametrize("family", MODELS)
def test_fenchel_duality(family):
    model = MODELS[family]
    for x in INTERIOR[family]:
        theta = model.grad_rate(x)
        dual = theta * x - float(model.cgf(theta))
        assert float(model.rate(x)) == pytest.approx(dual, abs=1e-9)
    rng = np.random.default_rng(7)
    lo, hi = THETAS[family]
    for theta in rng.uniform(lo, hi, 100):
        bound = theta * INTERIOR[family] - float(model.cgf(theta))
        assert np.all(model.rate_values(INTERIOR[family]) >= bound - 1e-12)


@pytest.mark.parametrize("family", MODELS)
def test_inverse_gradient_round_trip(family):
    model = MODELS[family]
    for x in INTERIOR[family]:
        assert model.inv_grad(model.grad_rate(x)) == pytest.approx(x, abs=1e-9)


@pytest.mark.parametrize("family", MODELS)
def test_rate_is_convex(family):
    model = MODELS[family]
    rng = np.random.default_rng(11)
    x = rng.choice(INTERIOR[family], 500)
    y = rng.choice(INTERIOR[family], 500)
    mid = model.rate_values((x + y) / 2)
    assert np.all(mid <= (model.rate_values(x) + model.rate_values(y)) / 2 + 1e-12)


@pytest.mark.parametrize("family", MODELS)
def test_gradient_matches_finite_difference(family):
    model = MODELS[family]
    h = 1e-6
    x = INTERIOR[family]
    fd = (model.rate_values(x + h) - model.rate_values(x - h)) / (2 * h)
    np.testing.assert_allclose(model.grad_values(x), fd, atol=1e-6)


def test_family_constants():
    g, p, s, b = MODELS.values()
    for m in (g, p, b):
        assert m.theta_up.is_inf and m.theta_down.is_inf
    assert s.theta_up == 2
    assert s.theta_down.is_inf
    assert g.r_bar.is_inf and p.r_bar.is_inf and s.r_bar.is_inf
    assert b.r_bar == 1
    assert g.coercive and p.coercive and s.coercive
    assert not b.coercive
    assert p.delta == pytest.approx(0.5)
    assert s.delta == pytest.approx(0.5)
    assert b.delta == pytest.approx(0.4)
    assert g.mean == -1
    # non-coercive: the cap slope has finite cost -log(α).
    assert float(b.rate_at_cap) == pytest.approx(-math.log(0.3))
    assert b.max_area == 0.5
    assert math.isinf(g.max_area)


@pytest.mark.parametrize(
    "family,params",
    [
        ("shifted_exponential", {"alpha": 1, "mu": 2}),
        ("poisson_batch", {"alpha": 0.5, "mu": 1.5}),
        ("poisson_batch", {"alpha": 2, "mu": 1}),
        ("bernoulli", {"alpha": 0.5}),
        ("gaussian", {"delta": -1, "sigma2": 1}),
        ("gaussian", {"delta": 1}),
    ],
)
def test_invalid_parameters(family, params):
    with pytest.raises(ModelConfigError):
        model_from_json({"family": family, "params": params})


def test_model_json():
    for model in MODELS.values():
        assert model_from_json(model.to_json()) == model
    assert model_from_json({"family": "gaussian", "params": {"delta": 1, "sigma2": 2}}).sigma2 == 2
    with pytest.raises(ModelConfigError):
        model_from_json({"family": "levy", "params": {}})
    with pytest.raises(ModelConfigError):
        model_from_json([1, 2])


def test_sample_support():
    rng = np.random.default_rng(3)
    b = MODELS["bernoulli"].sample(rng, 1000)
    assert set(np.unique(b)) <= {-1.0, 1.0}
    assert MODELS["bernoulli"].sample(rng) in (-1.0, 1.0)
    p = MODELS["poisson_batch"].sample(rng, 1000)
    assert np.all(p >= -1) and np.all(p == np.round(p))
    s = MODELS["shifted_exponential"].sample(rng, (10, 20))
    assert s.shape == (10, 20) and np.all(s > -1)


def test_gaussian_sample_mean():
    rng = np.random.default_rng(5)
    x = Gaussian(delta=0.5, sigma2=1).sample(rng, 1_000_000)
    assert abs(x.mean() + 0.5) < 0.005


@pytest.mark.parametrize(
    "family,lam,L",
    [
        ("gaussian", 2.0, 0.5),
        ("poisson_batch", 1.3, 0.8),
        ("poisson_batch", 4.0, 1.0),
        ("shifted_exponential", 1.5, 0.9),
        ("bernoulli", 2.0, 0.7),
        ("bernoulli", 30.0, 1.0),
    ],
)
def test_segment_integrals_match_quadrature(family, lam, L):
    model = MODELS[family]
    closed = model.segment_integrals(lam, L)
    quad = model._quad_integrals(lam, L, tol=1e-13)
    np.testing.assert_allclose(closed, quad, rtol=1e-8, atol=1e-12)
    assert float(model.g1_values(lam, L)) == pytest.approx(closed[0], rel=1e-10, abs=1e-13)


def test_segment_integrals_beyond_gradient_range():
    assert MODELS["shifted_exponential"].segment_integrals(3.0, 1.0)[0] == math.inf


@pytest.mark.parametrize("family", list(MODELS))
def test_segment_at_matches_multiplier(family):
    model = MODELS[family]
    L = 0.8
    for u in (0.05, 0.7, 1.5):
        lam, *integrals = model.segment_at(u, L)
        assert lam == pytest.approx(model.multiplier(u, L), rel=1e-14)
        np.testing.assert_allclose(integrals, model.segment_integrals(lam, L), rtol=1e-9, atol=1e-12)
        assert model.g1_at(u, L) == pytest.approx(integrals[0], rel=1e-9, abs=1e-12)


def test_shifted_exponential_segment_near_gradient_bound():
    model = MODELS["shifted_exponential"]
    lo, sup = model.multiplier_range(1.0, 1e-12)
    assert lo > 0 and sup == math.inf
    us = 20 + 1e-7 * np.arange(20)
    g1, g2, cost = np.array([model.segment_at(u, 1.0)[1:] for u in us]).T
    for values in (g1, g2, cost):
        assert np.all(np.diff(values) > 0)
    # d/du of (G1, G2, C) tends to (L/α, L²/α, L).
    np.testing.assert_allclose(np.diff(g1) / 1e-7, 0.5, rtol=1e-3)
    np.testing.assert_allclose(np.diff(g2) / 1e-7, 0.5, rtol=1e-3)
    np.testing.assert_allclose(np.diff(cost) / 1e-7, 1.0, rtol=1e-3)


def test_custom_quadratic_rate():
    custom = Custom(rate_fn=lambda x: 0.5 * (x + 1) ** 2)
    assert custom.delta == pytest.approx(1.0, abs=1e-6)
    assert custom.coercive
    assert custom.grad_rate(0.5) == pytest.approx(1.5, abs=1e-6)
    assert custom.inv_grad(1.5) == pytest.approx(0.5, abs=1e-6)
    assert float(custom.cgf(2.0)) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ModelConfigError):
        custom.sample(np.random.default_rng(0), 3)
    with pytest.raises(ModelConfigError):
        custom.to_json()


def test_custom_rejects_bad_rates():
    with pytest.raises(ValueError, match="not convex"):
        Custom(rate_fn=lambda x: math.sqrt(abs(x + 1)), delta=1.0)
    with pytest.raises(ValueError, match="negative drift"):
        Custom(rate_fn=lambda x: 0.5 * (x - 1) ** 2)
    bernoulli = BernoulliPM1(alpha=0.3)
    with pytest.raises(ValueError, match="theta_up"):
        Custom(
            rate_fn=lambda x: float(bernoulli.rate_values(x)),
            domain_lo=-1.0,
            domain_hi=1.0,
            delta=0.4,
            theta_up_value=1.0,
        )
