import math
from dataclasses import dataclass
from functools import cache, total_ordering
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_legendre

from rrwmean import logger


class RRWError(Exception):
    """Base class for all package errors."""


class ModelConfigError(RRWError, ValueError):
    """Invalid increment model or run configuration."""


class DomainError(RRWError, ValueError):
    """Argument outside the open domain (or gradient range) of a rate function."""


class InfeasibleTargetError(RRWError, ValueError):
    """No admissible path has the requested area."""

    def __init__(self, message: str, z: Optional[float] = None):
        super().__init__(message)
        self.z = z
        self.rate_value = ExtendedReal.inf()


class InfeasibleAreaError(InfeasibleTargetError):
    """No lattice path of the DP oracle lands in the target area window."""


class SolverConvergenceError(RRWError, RuntimeError):
    """A root bracket or optimization did not converge."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        msg = super().__str__()
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            msg = f"{msg} ({details})"
        return msg


@total_ordering
@dataclass(frozen=True)
class ExtendedReal:
    """A real number or +∞, tagged explicitly."""

    finite: bool = True
    value: float = 0.0

    @classmethod
    def of(cls, x: Union[float, "ExtendedReal"]) -> "ExtendedReal":
        if isinstance(x, ExtendedReal):
            return x
        x = float(x)
        if math.isnan(x) or x == -math.inf:
            raise ValueError(f"Can not represent {x} as an extended real.")
        if x == math.inf:
            return cls.inf()
        return cls(finite=True, value=x)

    @classmethod
    def inf(cls) -> "ExtendedReal":
        return cls(finite=False, value=0.0)

    @property
    def is_inf(self) -> bool:
        return not self.finite

    def __float__(self) -> float:
        return self.value if self.finite else math.inf

    def __add__(self, other) -> "ExtendedReal":
        other = ExtendedReal.of(other)
        if not (self.finite and other.finite):
            return ExtendedReal.inf()
        return ExtendedReal(value=self.value + other.value)

    __radd__ = __add__

    def __mul__(self, k: float) -> "ExtendedReal":
        if k < 0:
            raise ValueError("Extended reals only scale by nonnegative factors.")
        if not self.finite:
            return ExtendedReal.inf() if k > 0 else ExtendedReal()
        return ExtendedReal(value=self.value * k)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, (ExtendedReal, int, float)):
            return float(self) == float(other)
        return NotImplemented

    def __lt__(self, other) -> bool:
        if isinstance(other, (ExtendedReal, int, float)):
            return float(self) < float(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(float(self))

    def __str__(self) -> str:
        return f"{self.value:.12g}" if self.finite else "inf"

    def to_json(self) -> Union[float, str]:
        return self.value if self.finite else "inf"


def solve_increasing(
    f: Callable[[float], float],
    lo: float,
    sup: float = math.inf,
    *,
    xtol: float,
    rtol: float,
    maxiter: int,
    doublings: int,
    what: str = "lambda",
) -> float:
    """Root of an increasing function on (lo, sup).

    The upper end of the bracket is grown as 1, 2, 4, ... for an unbounded
    range, or as sup·(1 - 2^-k) when the admissible range ends at a finite sup.
    """
    f_lo = f(lo)
    if f_lo >= 0:
        raise SolverConvergenceError(
            f"No sign change for {what}: f(lo) >= 0.", {"lo": lo, "f_lo": f_lo}
        )
    hi = f_hi = None
    for k in range(doublings + 1):
        if math.isfinite(sup):
            b = sup * (1 - 2.0 ** -(k + 1))
        else:
            b = max(2.0**k, lo * 2)
        if b <= lo:
            continue
        fb = f(b)
        logger.debug("Bracketing %s: f(%s)=%s", what, b, fb)
        if not math.isnan(fb) and fb > 0:
            hi, f_hi = b, fb
            break
        lo, f_lo = b, fb if not math.isnan(fb) else f_lo
    if hi is None:
        raise SolverConvergenceError(
            f"Could not bracket {what} after {doublings} doublings.",
            {"last_lo": lo, "sup": sup},
        )
    if math.isinf(f_hi):
        # shrink towards lo until f is finite so brentq can interpolate.
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if fm <= 0:
                lo = mid
            elif math.isfinite(fm):
                hi = mid
                break
            else:
                hi = mid
    return brentq(f, lo, hi, xtol=xtol, rtol=rtol, maxiter=maxiter)


@cache
def _legendre_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return roots_legendre(n)


def gauss_legendre(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-11,
    nodes: int = 20,
    max_depth: int = 40,
) -> float:
    """Adaptive composite Gauss–Legendre quadrature of a vectorized integrand."""
    if b <= a:
        return 0.0
    x, w = _legendre_nodes(nodes)

    def panel(lo: float, hi: float) -> float:
        half = 0.5 * (hi - lo)
        return half * float(np.dot(w, f(half * x + 0.5 * (hi + lo))))

    total = 0.0
    stack = [(a, b, panel(a, b), 0)]
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        # tolerance is split proportionally to the panel width.
        if (
            abs(left + right - whole) <= tol * (hi - lo) / (b - a)
            or depth >= max_depth
        ):
            total += left + right
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return total


def fmt(x: Any) -> str:
    """12 significant digits for every number written by the tools."""
    if isinstance(x, ExtendedReal):
        return str(x)
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"
