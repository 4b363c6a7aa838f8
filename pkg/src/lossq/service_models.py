"""Service-time laws and the transform/moment quantities derived from them.

Every supported kind has closed forms for its Laplace-Stieltjes transform,
the transform's derivatives, raw moments, and the Poisson-mixture kernel

    pi_i = integral of exp(-lam x) (lam x)^i / i! dB(x),

which is the probability of ``i`` Poisson arrivals during one service.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special, stats

from .errors import TruncationError, UnsupportedOrderError, ValidationError

DEFAULT_TAIL_TOL = 1e-12
HARD_I_MAX = 10**6


class Kind(str, Enum):
    DETERMINISTIC = "deterministic"
    EXPONENTIAL = "exponential"
    ERLANG = "erlang"
    HYPEREXPONENTIAL = "hyperexponential"
    UNIFORM = "uniform"


# Number of parameters each kind takes; hyperexponential takes (weight, mean) pairs.
_ARITY = {
    Kind.DETERMINISTIC: 1,
    Kind.EXPONENTIAL: 1,
    Kind.ERLANG: 2,
    Kind.UNIFORM: 2,
}


@dataclass(frozen=True)
class ServiceDistribution:
    """A parametric service-time law.

    Parameter layout per kind:

    ============== ======================================
    deterministic  ``(b,)``
    exponential    ``(b,)`` (mean, not rate)
    erlang         ``(shape, b)`` with integer shape
    hyperexp.      ``(w1, b1, w2, b2, ...)``
    uniform        ``(low, high)``
    ============== ======================================

    Use the classmethod constructors rather than building ``params`` by hand.
    """

    kind: Kind
    params: tuple[float, ...]

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        params = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", params)
        if not all(math.isfinite(x) for x in params):
            raise ValidationError(f"non-finite parameter in {params}")

        if kind in _ARITY and len(params) != _ARITY[kind]:
            raise ValidationError(
                f"{kind.value} takes {_ARITY[kind]} parameter(s), got {len(params)}"
            )
        if kind is Kind.DETERMINISTIC or kind is Kind.EXPONENTIAL:
            if params[0] <= 0:
                raise ValidationError(f"{kind.value} mean must be > 0, got {params[0]}")
        elif kind is Kind.ERLANG:
            shape, mean = params
            if shape < 1 or shape != int(shape):
                raise ValidationError(f"erlang shape must be a positive integer, got {shape}")
            if mean <= 0:
                raise ValidationError(f"erlang mean must be > 0, got {mean}")
        elif kind is Kind.HYPEREXPONENTIAL:
            if len(params) < 2 or len(params) % 2:
                raise ValidationError("hyperexponential takes (weight, mean) pairs")
            w = np.asarray(params[0::2])
            m = np.asarray(params[1::2])
            if np.any(w <= 0) or np.any(m <= 0):
                raise ValidationError("hyperexponential weights and means must be > 0")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValidationError(f"hyperexponential weights sum to {w.sum()!r}, not 1")
        elif kind is Kind.UNIFORM:
            low, high = params
            if low < 0 or high <= low:
                raise ValidationError(f"uniform needs 0 <= low < high, got ({low}, {high})")

    @classmethod
    def deterministic(cls, b):
        return cls(Kind.DETERMINISTIC, (b,))

    @classmethod
    def exponential(cls, b):
        return cls(Kind.EXPONENTIAL, (b,))

    @classmethod
    def erlang(cls, shape, b):
        return cls(Kind.ERLANG, (shape, b))

    @classmethod
    def hyperexponential(cls, weights, means):
        if len(weights) != len(means):
            raise ValidationError("hyperexponential weights and means differ in length")
        flat = []
        for w, m in zip(weights, means):
            flat.extend((w, m))
        return cls(Kind.HYPEREXPONENTIAL, tuple(flat))

    @classmethod
    def uniform(cls, low, high):
        return cls(Kind.UNIFORM, (low, high))

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def _weights(self):
        return np.asarray(self.params[0::2])

    @property
    def _means(self):
        return np.asarray(self.params[1::2])

    def moment(self, j: int) -> float:
        """Raw moment E[X^j]."""
        if j < 0:
            raise ValidationError(f"moment order must be >= 0, got {j}")
        k = self.kind
        if k is Kind.DETERMINISTIC:
            return self.params[0] ** j
        if k is Kind.EXPONENTIAL:
            return math.factorial(j) * self.params[0] ** j
        if k is Kind.ERLANG:
            shape, b = int(self.params[0]), self.params[1]
            rate = shape / b
            return math.prod(range(shape, shape + j)) / rate**j
        if k is Kind.HYPEREXPONENTIAL:
            return float(np.sum(self._weights * math.factorial(j) * self._means**j))
        low, high = self.params
        return (high ** (j + 1) - low ** (j + 1)) / ((j + 1) * (high - low))

    def scaled(self, factor: float) -> "ServiceDistribution":
        """Same shape, every service time multiplied by ``factor``."""
        if factor <= 0:
            raise ValidationError(f"scale factor must be > 0, got {factor}")
        k = self.kind
        if k is Kind.ERLANG:
            return ServiceDistribution(k, (self.params[0], self.params[1] * factor))
        if k is Kind.HYPEREXPONENTIAL:
            p = list(self.params)
            p[1::2] = [m * factor for m in p[1::2]]
            return ServiceDistribution(k, tuple(p))
        return ServiceDistribution(k, tuple(x * factor for x in self.params))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k = self.kind
        if k is Kind.DETERMINISTIC:
            return np.full(size, self.params[0])
        if k is Kind.EXPONENTIAL:
            return rng.exponential(self.params[0], size)
        if k is Kind.ERLANG:
            shape, b = self.params
            return rng.gamma(shape, b / shape, size)
        if k is Kind.HYPEREXPONENTIAL:
            branch = rng.choice(len(self._weights), size=size, p=self._weights)
            return rng.exponential(1.0, size) * self._means[branch]
        low, high = self.params
        return rng.uniform(low, high, size)

    def describe(self) -> str:
        args = ", ".join(f"{x:g}" for x in self.params)
        return f"{self.kind.value}({args})"


@dataclass(frozen=True)
class TrafficMoments:
    """``rho_j[j-1] = lam**j * E[X**j]`` for ``j = 1..j_max``."""

    lam: float
    rho: float
    rho_j: tuple[float, ...]

    def __getitem__(self, j: int) -> float:
        if j < 1 or j > len(self.rho_j):
            raise IndexError(f"rho_{j} not computed (j_max={len(self.rho_j)})")
        return self.rho_j[j - 1]

    @property
    def rho2(self) -> float:
        return self[2]

    @property
    def rho3(self) -> float:
        return self[3] if len(self.rho_j) >= 3 else math.nan


@dataclass(frozen=True, eq=False)
class PiVector:
    """Truncated kernel pi_0..pi_{i_max} with the residual mass it drops."""

    probs: np.ndarray = field(repr=False)
    tail_mass: float

    @property
    def i_max(self) -> int:
        return len(self.probs) - 1

    def __len__(self):
        return len(self.probs)


def _check_s(s):
    if s < 0 or not math.isfinite(s):
        raise ValidationError(f"transform argument must be finite and >= 0, got {s}")


def lst(dist: ServiceDistribution, s: float) -> float:
    """Laplace-Stieltjes transform beta(s) = E[exp(-s X)]."""
    _check_s(s)
    if s == 0:
        return 1.0
    k = dist.kind
    if k is Kind.DETERMINISTIC:
        return math.exp(-s * dist.params[0])
    if k is Kind.EXPONENTIAL:
        return 1.0 / (1.0 + dist.params[0] * s)
    if k is Kind.ERLANG:
        shape, b = dist.params
        rate = shape / b
        return (rate / (rate + s)) ** int(shape)
    if k is Kind.HYPEREXPONENTIAL:
        return float(np.sum(dist._weights / (1.0 + dist._means * s)))
    low, high = dist.params
    width = high - low
    return math.exp(-s * low) * -math.expm1(-s * width) / (s * width)


def lst_deriv(dist: ServiceDistribution, s: float, order: int) -> float:
    """``order``-th derivative of beta at ``s``, i.e. ``(-1)^n E[X^n exp(-sX)]``."""
    _check_s(s)
    if order < 1 or int(order) != order:
        raise UnsupportedOrderError(f"derivative order must be a positive integer, got {order}")
    n = int(order)
    sign = -1.0 if n % 2 else 1.0
    k = dist.kind
    if k is Kind.DETERMINISTIC:
        b = dist.params[0]
        return sign * b**n * math.exp(-s * b)
    if k is Kind.EXPONENTIAL:
        rate = 1.0 / dist.params[0]
        return sign * math.factorial(n) * rate / (rate + s) ** (n + 1)
    if k is Kind.ERLANG:
        shape, b = int(dist.params[0]), dist.params[1]
        rate = shape / b
        rising = math.prod(range(shape, shape + n))
        return sign * rising * rate**shape / (rate + s) ** (shape + n)
    if k is Kind.HYPEREXPONENTIAL:
        rates = 1.0 / dist._means
        return sign * math.factorial(n) * float(np.sum(dist._weights * rates / (rates + s) ** (n + 1)))
    low, high = dist.params
    if s == 0:
        return sign * (high ** (n + 1) - low ** (n + 1)) / ((n + 1) * (high - low))
    # integral_a^c x^n e^{-sx} dx through regularized lower incomplete gamma
    upper = special.gammainc(n + 1, s * high)
    lower = special.gammainc(n + 1, s * low)
    integral = math.factorial(n) / s ** (n + 1) * float(upper - lower)
    return sign * integral / (high - low)


def traffic_moments(dist: ServiceDistribution, lam: float, j_max: int = 3) -> TrafficMoments:
    if lam <= 0:
        raise ValidationError(f"arrival rate must be > 0, got {lam}")
    if j_max < 2:
        raise ValidationError(f"j_max must be >= 2, got {j_max}")
    rho_j = tuple(lam**j * dist.moment(j) for j in range(1, j_max + 1))
    return TrafficMoments(lam=lam, rho=rho_j[0], rho_j=rho_j)


def _pi_block(dist: ServiceDistribution, lam: float, i: np.ndarray) -> np.ndarray:
    k = dist.kind
    if k is Kind.DETERMINISTIC:
        return stats.poisson.pmf(i, lam * dist.params[0])
    if k is Kind.EXPONENTIAL:
        a = lam * dist.params[0]
        return np.exp(i * math.log(a / (1.0 + a))) / (1.0 + a)
    if k is Kind.ERLANG:
        shape, b = dist.params
        rate = shape / b
        return stats.nbinom.pmf(i, int(shape), rate / (rate + lam))
    if k is Kind.HYPEREXPONENTIAL:
        out = np.zeros(len(i))
        for w, m in zip(dist._weights, dist._means):
            a = lam * m
            out += w * np.exp(i * math.log(a / (1.0 + a))) / (1.0 + a)
        return out
    low, high = dist.params
    upper = special.gammainc(i + 1, lam * high)
    lower = special.gammainc(i + 1, lam * low)
    return (upper - lower) / (lam * (high - low))


def pi_probs(
    dist: ServiceDistribution,
    lam: float,
    tail_tol: float = DEFAULT_TAIL_TOL,
    min_terms: int = 1,
) -> PiVector:
    """Kernel probabilities until the dropped tail is at most ``tail_tol``.

    ``min_terms`` forces at least that many entries even if the tail is
    already small; recurrences of depth K only ever read pi_0..pi_K.
    """
    if lam <= 0:
        raise ValidationError(f"arrival rate must be > 0, got {lam}")
    if not 0 < tail_tol < 1:
        raise ValidationError(f"tail_tol must lie in (0, 1), got {tail_tol}")

    size = max(64, int(min_terms))
    while True:
        probs = np.clip(_pi_block(dist, lam, np.arange(size, dtype=float)), 0.0, 1.0)
        tails = 1.0 - np.cumsum(probs)
        hit = np.nonzero(tails <= tail_tol)[0]
        if hit.size:
            n = max(int(hit[0]) + 1, int(min_terms))
            probs = probs[:n]
            tail = max(0.0, 1.0 - math.fsum(probs))
            return PiVector(probs=probs, tail_mass=tail)
        if size >= HARD_I_MAX + 1:
            raise TruncationError(
                f"pi tail still above {tail_tol} at i_max={HARD_I_MAX} for {dist.describe()}"
            )
        size = min(size * 4, HARD_I_MAX + 1)
