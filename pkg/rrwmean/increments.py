"""Increment-law families and the pointwise rate-function calculus.

Every family exposes its cumulant generating function, the local rate
function I (the Legendre transform of the cgf), its gradient and inverse
gradient, the tail abscissas θ↑/θ↓, the cap r̄ and a sampler. Vectorized
``*_values`` methods work on numpy arrays and use ``np.inf`` internally;
the scalar public methods return tagged extended reals.
"""

import math
from abc import abstractmethod
from typing import Any, Callable, Dict, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)
from scipy.optimize import brentq, minimize_scalar
from scipy.special import xlogy

from rrwmean import logger

from .common import DomainError, ExtendedReal, ModelConfigError, gauss_legendre

ArrayLike = Union[float, np.ndarray]

# below this value of λ·L the closed-form segment integrals lose digits to
# cancellation and quadrature is used instead.
_SERIES_CUTOFF = 1e-2


class IncrementModel(BaseModel):
    """Base class of the increment-law families.

    Subclasses define ``delta`` (as a field or a property) and the
    vectorized rate calculus. Scalar wrappers and the smooth-segment
    integrals used by the path solver are implemented here.
    """

    model_config = ConfigDict(frozen=True)

    family: str

    # ---- family interface ----

    @abstractmethod
    def cgf(self, theta: float) -> ExtendedReal:
        """log E[exp(θX₀)]."""

    @abstractmethod
    def rate_values(self, x: ArrayLike) -> np.ndarray:
        """I(x) with +inf outside the finiteness domain."""

    @abstractmethod
    def grad_values(self, x: ArrayLike) -> np.ndarray:
        """∇I(x) for x strictly inside the domain (no range checks)."""

    @abstractmethod
    def inv_grad_values(self, s: ArrayLike) -> np.ndarray:
        """(∇I)⁻¹(s) for s inside the gradient range (no range checks)."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size=None) -> Union[float, np.ndarray]:
        """Draw increments X₀."""

    @property
    @abstractmethod
    def domain(self) -> Tuple[float, float]:
        """Closed hull (lo, hi) of {x : I(x) < ∞}."""

    @property
    def theta_up(self) -> ExtendedReal:
        return ExtendedReal.inf()

    @property
    def theta_down(self) -> ExtendedReal:
        return ExtendedReal.inf()

    @property
    def grad_sup(self) -> float:
        """Supremum of the gradient range of I."""
        return math.inf

    # ---- derived quantities ----

    @property
    def mean(self) -> float:
        return -self.delta

    @property
    def r_bar(self) -> ExtendedReal:
        return ExtendedReal.of(self.domain[1])

    @property
    def coercive(self) -> bool:
        hi = self.domain[1]
        return not (math.isfinite(hi) and math.isfinite(self.rate_values(hi)))

    @property
    def rate_at_cap(self) -> ExtendedReal:
        """I(r̄): finite only for non-coercive families."""
        if self.r_bar.is_inf:
            return ExtendedReal.inf()
        return self.rate(self.r_bar.value)

    @property
    def max_area(self) -> float:
        """Largest area a path on [0,1] can enclose with finite cost."""
        if self.coercive:
            return math.inf
        return 0.5 * max(self.r_bar.value, 0.0)

    def rate(self, x: float) -> ExtendedReal:
        return ExtendedReal.of(float(self.rate_values(float(x))))

    def grad_rate(self, x: float) -> float:
        lo, hi = self.domain
        if not lo < x < hi:
            raise DomainError(
                f"grad_rate: x={x} outside open domain ({lo}, {hi}) of {self.family}."
            )
        return float(self.grad_values(float(x)))

    def inv_grad(self, s: float) -> float:
        if not s < self.grad_sup:
            raise DomainError(
                f"inv_grad: s={s} outside gradient range (-inf, {self.grad_sup}) of {self.family}."
            )
        return float(self.inv_grad_values(float(s)))

    def in_open_domain(self, x: np.ndarray, guard: float = 0.0) -> np.ndarray:
        lo, hi = self.domain
        return (x > lo + guard) & (x < hi - guard)

    # ---- smooth-segment integrals ----

    def g1_values(self, lam: float, L: ArrayLike) -> np.ndarray:
        """∫₀ᴸ ∇I⁻¹(λv) dv for each L."""
        return np.vectorize(
            lambda l: self._quad_integrals(lam, l, tol=1e-12)[0], otypes=[float]
        )(np.asarray(L, dtype=float))

    def segment_integrals(
        self, lam: float, L: float, tol: float = 1e-11
    ) -> Tuple[float, float, float]:
        """(G1, G2, C) = ∫₀ᴸ g, ∫₀ᴸ v·g, ∫₀ᴸ I(g) with g(v) = ∇I⁻¹(λv)."""
        if lam < 0 or L < 0:
            raise ValueError(f"segment integrals need lam, L >= 0 (got {lam}, {L}).")
        if lam * L >= self.grad_sup:
            return math.inf, math.inf, math.inf
        return self._quad_integrals(lam, L, tol)

    # ---- root variable of the multiplier ----
    #
    # The path solver roots the segment conditions in a variable u with
    # λ = multiplier(u, L). Families whose integrals blow up as λL reaches
    # grad_sup use an unbounded u so the segment stays well conditioned there.

    def multiplier_range(self, L: float, floor: float) -> Tuple[float, float]:
        """(lo, sup) of the root variable for a segment of length L."""
        return floor, self.grad_sup / L

    def multiplier(self, u: float, L: float) -> float:
        return u

    def g1_at(self, u: float, L: float) -> float:
        return float(self.g1_values(self.multiplier(u, L), L))

    def segment_at(
        self, u: float, L: float, tol: float = 1e-11
    ) -> Tuple[float, float, float, float]:
        """(λ, G1, G2, C) for root variable u."""
        lam = self.multiplier(u, L)
        return (lam, *self.segment_integrals(lam, L, tol))

    def _quad_integrals(self, lam: float, L: float, tol: float) -> Tuple[float, float, float]:
        if lam == 0 or L == 0:
            return -self.delta * L, -0.5 * self.delta * L * L, 0.0

        def g(v):
            return self.inv_grad_values(lam * v)

        g1 = gauss_legendre(g, 0.0, L, tol)
        g2 = gauss_legendre(lambda v: v * g(v), 0.0, L, tol)
        c = gauss_legendre(lambda v: self.rate_values(g(v)), 0.0, L, tol)
        return g1, g2, c

    # ---- serialization ----

    def to_json(self) -> Dict[str, Any]:
        return {"family": self.family, "params": self.model_dump(exclude={"family"})}

    def __str__(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.to_json()["params"].items())
        return f"{self.family}({params})"


class Gaussian(IncrementModel):
    """X₀ ~ N(−δ, σ²)."""

    family: Literal["gaussian"] = "gaussian"
    delta: PositiveFloat
    sigma2: PositiveFloat

    @property
    def domain(self) -> Tuple[float, float]:
        return (-math.inf, math.inf)

    @property
    def variance(self) -> float:
        return self.sigma2

    def cgf(self, theta: float) -> ExtendedReal:
        return ExtendedReal.of(-self.delta * theta + 0.5 * self.sigma2 * theta * theta)

    def rate_values(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x + self.delta) ** 2 / (2 * self.sigma2)

    def grad_values(self, x: ArrayLike) -> np.ndarray:
        return (np.asarray(x, dtype=float) + self.delta) / self.sigma2

    def inv_grad_values(self, s: ArrayLike) -> np.ndarray:
        return self.sigma2 * np.asarray(s, dtype=float) - self.delta

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(-self.delta, math.sqrt(self.sigma2), size)

    def g1_values(self, lam: float, L: ArrayLike) -> np.ndarray:
        L = np.asarray(L, dtype=float)
        return 0.5 * self.sigma2 * lam * L**2 - self.delta * L

    def segment_integrals(self, lam: float, L: float, tol: float = 1e-11):
        s2, d = self.sigma2, self.delta
        return (
            0.5 * s2 * lam * L**2 - d * L,
            s2 * lam * L**3 / 3 - 0.5 * d * L**2,
            s2 * lam**2 * L**3 / 6,
        )


class PoissonBatch(IncrementModel):
    """X₀ = N − μ with N ~ Poisson(α): batch arrivals served μ at a time."""

    family: Literal["poisson_batch"] = "poisson_batch"
    alpha: PositiveFloat
    mu: PositiveInt

    @model_validator(mode="after")
    def _check_stable(self):
        if self.mu <= self.alpha:
            raise ValueError(
                f"poisson_batch requires alpha < mu for a negative drift (alpha={self.alpha}, mu={self.mu})."
            )
        return self

    @property
    def delta(self) -> float:
        return self.mu - self.alpha

    @property
    def domain(self) -> Tuple[float, float]:
        return (-float(self.mu), math.inf)

    @property
    def variance(self) -> float:
        return self.alpha

    def cgf(self, theta: float) -> ExtendedReal:
        return ExtendedReal.of(self.alpha * math.expm1(theta) - self.mu * theta)

    def rate_values(self, x: ArrayLike) -> np.ndarray:
        y = np.asarray(x, dtype=float) + self.mu
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.alpha - y + xlogy(y, y / self.alpha)
        return np.where(y > 0, out, np.inf)

    def grad_values(self, x: ArrayLike) -> np.ndarray:
        return np.log((np.asarray(x, dtype=float) + self.mu) / self.alpha)

    def inv_grad_values(self, s: ArrayLike) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.alpha * np.exp(np.asarray(s, dtype=float)) - self.mu

    def sample(self, rng: np.random.Generator, size=None):
        return rng.poisson(self.alpha, size) - float(self.mu)

    def g1_values(self, lam: float, L: ArrayLike) -> np.ndarray:
        L = np.asarray(L, dtype=float)
        if lam == 0:
            return -self.delta * L
        with np.errstate(over="ignore"):
            return self.alpha * np.expm1(lam * L) / lam - self.mu * L

    def segment_integrals(self, lam: float, L: float, tol: float = 1e-11):
        y = lam * L
        if y < _SERIES_CUTOFF:
            return super().segment_integrals(lam, L, tol)
        a, m = self.alpha, self.mu
        with np.errstate(over="ignore"):
            em1 = float(np.expm1(y))
            g1 = a * em1 / lam - m * L
            g2 = a * ((y - 1) * em1 + y) / lam**2 - 0.5 * m * L * L
            c = a * ((y - 2) * em1 + 2 * y) / lam
        return g1, g2, c


class ShiftedExponential(IncrementModel):
    """X₀ = S − 1/μ with S ~ Exponential(α): exponential service, deterministic arrivals."""

    family: Literal["shifted_exponential"] = "shifted_exponential"
    alpha: PositiveFloat
    mu: PositiveFloat

    @model_validator(mode="after")
    def _check_stable(self):
        if not self.mu < self.alpha:
            raise ValueError(
                f"shifted_exponential requires mu < alpha for a negative drift (alpha={self.alpha}, mu={self.mu})."
            )
        return self

    @property
    def delta(self) -> float:
        return 1 / self.mu - 1 / self.alpha

    @property
    def domain(self) -> Tuple[float, float]:
        return (-1 / self.mu, math.inf)

    @property
    def theta_up(self) -> ExtendedReal:
        return ExtendedReal.of(self.alpha)

    @property
    def grad_sup(self) -> float:
        return self.alpha

    @property
    def variance(self) -> float:
        return 1 / self.alpha**2

    def cgf(self, theta: float) -> ExtendedReal:
        if theta >= self.alpha:
            return ExtendedReal.inf()
        return ExtendedReal.of(
            math.log(self.alpha / (self.alpha - theta)) - theta / self.mu
        )

    def rate_values(self, x: ArrayLike) -> np.ndarray:
        y = self.alpha * (np.asarray(x, dtype=float) + 1 / self.mu)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = y - 1 - np.log(y)
        return np.where(y > 0, out, np.inf)

    def grad_values(self, x: ArrayLike) -> np.ndarray:
        return self.alpha - 1 / (np.asarray(x, dtype=float) + 1 / self.mu)

    def inv_grad_values(self, s: ArrayLike) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1 / (self.alpha - np.asarray(s, dtype=float)) - 1 / self.mu

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1 / self.alpha, size) - 1 / self.mu

    def g1_values(self, lam: float, L: ArrayLike) -> np.ndarray:
        L = np.asarray(L, dtype=float)
        if lam == 0:
            return -self.delta * L
        with np.errstate(divide="ignore", invalid="ignore"):
            ell = -np.log1p(-lam * L / self.alpha)
            return np.where(lam * L < self.alpha, ell / lam - L / self.mu, np.inf)

    def segment_integrals(self, lam: float, L: float, tol: float = 1e-11):
        r = lam * L / self.alpha
        if r >= 1:
            return math.inf, math.inf, math.inf
        if r < _SERIES_CUTOFF:
            return super().segment_integrals(lam, L, tol)
        return self._closed_form(-math.log1p(-r), r, L)

    def _closed_form(self, ell: float, r: float, L: float) -> Tuple[float, float, float]:
        lam = self.alpha * r / L
        g1 = ell / lam - L / self.mu
        g2 = (L / lam) * (ell / r - 1) - 0.5 * L * L / self.mu
        c = L * ((2 - r) * ell / r - 2)
        return g1, g2, c

    # root variable ℓ = −log(1 − λL/α), unbounded as λL → α.

    def multiplier_range(self, L: float, floor: float) -> Tuple[float, float]:
        return -math.log1p(-min(floor * L / self.alpha, 0.5)), math.inf

    def multiplier(self, u: float, L: float) -> float:
        return -self.alpha * math.expm1(-u) / L

    def g1_at(self, u: float, L: float) -> float:
        if u == 0:
            return -self.delta * L
        return u / self.multiplier(u, L) - L / self.mu

    def segment_at(self, u: float, L: float, tol: float = 1e-11):
        r = -math.expm1(-u)
        lam = self.alpha * r / L
        if r < _SERIES_CUTOFF:
            return (lam, *super().segment_integrals(lam, L, tol))
        return (lam, *self._closed_form(u, r, L))


class BernoulliPM1(IncrementModel):
    """X₀ = +1 with probability α, −1 otherwise: the M/M/1 queue observed at transitions."""

    family: Literal["bernoulli"] = "bernoulli"
    alpha: float = Field(gt=0, lt=0.5)

    @property
    def delta(self) -> float:
        return 1 - 2 * self.alpha

    @property
    def domain(self) -> Tuple[float, float]:
        return (-1.0, 1.0)

    @property
    def variance(self) -> float:
        return 1 - self.delta**2

    @property
    def shift(self) -> float:
        """s₀ = ½·log((1−α)/α), the gradient offset: ∇I(x) = artanh(x) + s₀."""
        return 0.5 * math.log((1 - self.alpha) / self.alpha)

    def cgf(self, theta: float) -> ExtendedReal:
        return ExtendedReal.of(
            float(
                np.logaddexp(
                    math.log(self.alpha) + theta, math.log1p(-self.alpha) - theta
                )
            )
        )

    def rate_values(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        up, down = 1 + x, 1 - x
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 0.5 * (
                xlogy(up, up)
                - up * math.log(2 * self.alpha)
                + xlogy(down, down)
                - down * math.log(2 * (1 - self.alpha))
            )
        return np.where(np.abs(x) <= 1, out, np.inf)

    def grad_values(self, x: ArrayLike) -> np.ndarray:
        return np.arctanh(np.asarray(x, dtype=float)) + self.shift

    def inv_grad_values(self, s: ArrayLike) -> np.ndarray:
        return np.tanh(np.asarray(s, dtype=float) - self.shift)

    def sample(self, rng: np.random.Generator, size=None):
        draw = np.where(rng.random(size) < self.alpha, 1.0, -1.0)
        return float(draw) if size is None else draw

    def g1_values(self, lam: float, L: ArrayLike) -> np.ndarray:
        L = np.asarray(L, dtype=float)
        if lam == 0:
            return -self.delta * L
        y = lam * L
        tanh_a = math.tanh(-self.shift)
        # cosh(a+y)/cosh(a) = cosh(y) + tanh(a)·sinh(y), written to avoid cancellation.
        with np.errstate(over="ignore", invalid="ignore"):
            ys = np.minimum(y, 20.0)
            small = np.log1p(2 * np.sinh(ys / 2) ** 2 + tanh_a * np.sinh(ys)) / lam
            large = (_logcosh(y - self.shift) - _logcosh(self.shift)) / lam
        return np.where(y <= 20.0, small, large)

    def segment_integrals(self, lam: float, L: float, tol: float = 1e-11):
        if lam * L < _SERIES_CUTOFF:
            return super().segment_integrals(lam, L, tol)
        g1 = float(self.g1_values(lam, L))

        def g(v):
            return np.tanh(lam * v - self.shift)

        g2 = gauss_legendre(lambda v: v * g(v), 0.0, L, tol)
        c = gauss_legendre(lambda v: self.rate_values(g(v)), 0.0, L, tol)
        return g1, g2, c


def _logcosh(y: ArrayLike) -> np.ndarray:
    y = np.abs(np.asarray(y, dtype=float))
    return y + np.log1p(np.exp(-2 * y)) - math.log(2)


class Custom(IncrementModel):
    """Increment law given only through a user-supplied convex rate function.

    The rate function must be finite on the closed ``domain`` and +inf
    outside it. ``delta`` is located by bounded minimization when omitted.
    """

    model_config = ConfigDict(frozen=False, arbitrary_types_allowed=True)

    family: Literal["custom"] = "custom"
    rate_fn: Callable[[float], float]
    domain_lo: float = -math.inf
    domain_hi: float = math.inf
    delta: Optional[PositiveFloat] = None
    theta_up_value: Optional[PositiveFloat] = None
    theta_down_value: Optional[PositiveFloat] = None
    sampler: Optional[Callable[[np.random.Generator, Any], Any]] = None
    # convexity probe interval; defaults to the domain clipped to [-50, 50].
    probe: Optional[Tuple[float, float]] = None

    def model_post_init(self, __context) -> None:
        lo, hi = self.probe_interval
        if self.delta is None:
            res = minimize_scalar(
                lambda x: float(self._rate_scalar(x)),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-12},
            )
            if res.x >= 0:
                raise ModelConfigError(
                    f"custom rate function has its minimum at x={res.x} >= 0; a negative drift is required."
                )
            self.delta = -float(res.x)
            logger.info("Custom model: located drift delta=%s", self.delta)
        if abs(self._rate_scalar(-self.delta)) > 1e-9:
            raise ModelConfigError(
                f"custom rate function must vanish at -delta (I({-self.delta})={self._rate_scalar(-self.delta)})."
            )
        xs = np.linspace(lo, hi, 257)
        values = np.array([self._rate_scalar(x) for x in xs])
        if np.any(values < -1e-12):
            raise ModelConfigError("custom rate function takes negative values.")
        violation = values[1:-1] - 0.5 * (values[:-2] + values[2:])
        if np.any(violation > 1e-9):
            k = int(np.argmax(violation)) + 1
            raise ModelConfigError(
                f"custom rate function is not convex near x={xs[k]} (midpoint violation {violation[k - 1]:.3g})."
            )
        if not self.coercive and self.theta_up_value is not None:
            raise ModelConfigError(
                "a non-coercive rate function can not have a finite theta_up."
            )

    @property
    def probe_interval(self) -> Tuple[float, float]:
        if self.probe is not None:
            return self.probe
        lo, hi = max(self.domain_lo, -50.0), min(self.domain_hi, 50.0)
        # stay clear of edges where I may blow up.
        pad = 1e-6 * (hi - lo)
        return (
            lo + pad if math.isfinite(self.domain_lo) and lo == self.domain_lo else lo,
            hi - pad if math.isfinite(self.domain_hi) and hi == self.domain_hi else hi,
        )

    @property
    def domain(self) -> Tuple[float, float]:
        return (self.domain_lo, self.domain_hi)

    @property
    def theta_up(self) -> ExtendedReal:
        if self.theta_up_value is None:
            return ExtendedReal.inf()
        return ExtendedReal.of(self.theta_up_value)

    @property
    def theta_down(self) -> ExtendedReal:
        if self.theta_down_value is None:
            return ExtendedReal.inf()
        return ExtendedReal.of(self.theta_down_value)

    @property
    def grad_sup(self) -> float:
        return float(self.theta_up)

    def _rate_scalar(self, x: float) -> float:
        if not self.domain_lo <= x <= self.domain_hi:
            return math.inf
        return float(self.rate_fn(x))

    def cgf(self, theta: float) -> ExtendedReal:
        if theta >= float(self.theta_up) or -theta >= float(self.theta_down):
            return ExtendedReal.inf()
        lo, hi = self.probe_interval
        res = minimize_scalar(
            lambda x: self._rate_scalar(x) - theta * x,
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        return ExtendedReal.of(-float(res.fun))

    def rate_values(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.vectorize(self._rate_scalar, otypes=[float])(x)

    def grad_values(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        return (self.rate_values(x + h) - self.rate_values(x - h)) / (2 * h)

    def _inv_grad_scalar(self, s: float) -> float:
        lo, hi = self.domain
        x0 = -self.delta

        def f(x):
            return float(self.grad_values(x)) - s

        # expand a bracket around the drift, staying inside the open domain.
        a = b = x0
        step = 1.0
        for _ in range(200):
            if f(a) <= 0:
                break
            a = max(x0 - step, lo + 1e-9 * max(1.0, abs(lo))) if math.isfinite(lo) else x0 - step
            step *= 2
        step = 1.0
        for _ in range(200):
            if f(b) >= 0:
                break
            b = min(x0 + step, hi - 1e-9 * max(1.0, abs(hi))) if math.isfinite(hi) else x0 + step
            step *= 2
        if f(a) > 0 or f(b) < 0:
            raise DomainError(f"inv_grad: s={s} outside the attainable gradient range.")
        if a == b:
            return a
        return brentq(f, a, b, xtol=1e-12)

    def inv_grad_values(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.vectorize(self._inv_grad_scalar, otypes=[float])(s)

    def sample(self, rng: np.random.Generator, size=None):
        if self.sampler is None:
            raise ModelConfigError("custom model has no sampler.")
        return self.sampler(rng, size)

    def to_json(self) -> Dict[str, Any]:
        raise ModelConfigError("custom models can not be serialized to JSON.")

    def __str__(self) -> str:
        return f"custom(delta={self.delta}, domain=[{self.domain_lo}, {self.domain_hi}])"


_FAMILIES = {
    "gaussian": Gaussian,
    "poisson_batch": PoissonBatch,
    "shifted_exponential": ShiftedExponential,
    "bernoulli": BernoulliPM1,
}


def model_from_json(obj: Dict[str, Any]) -> IncrementModel:
    """Build a model from {"family": ..., "params": {...}}."""
    if not isinstance(obj, dict) or "family" not in obj:
        raise ModelConfigError('model JSON must be an object with a "family" key.')
    family = obj["family"]
    if family not in _FAMILIES:
        raise ModelConfigError(
            f"unknown family {family!r} (expected one of {', '.join(_FAMILIES)})."
        )
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ModelConfigError('"params" must be an object.')
    try:
        return _FAMILIES[family](**params)
    except ValidationError as e:
        errors = "; ".join(
            f"{'.'.join(map(str, err['loc'])) or family}: {err['msg']}"
            for err in e.errors()
        )
        raise ModelConfigError(f"invalid {family} parameters: {errors}") from e
    except TypeError as e:
        raise ModelConfigError(f"invalid {family} parameters: {e}") from e
