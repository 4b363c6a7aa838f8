"""The recurrence ``Q_k = sum_{i=0}^{k} r_i Q_{k-i+1}`` and its large-k behaviour.

Every busy-period expectation in this package is a solution of this
recurrence for the Poisson-mixture kernel; the helpers here know nothing
about queues and work for any probability kernel with ``r_0 > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BracketError, IllConditionedError, RegimeError, ValidationError
from .regime import Regime, classify_load

R0_FLOOR = 1e-14
# Working values are rescaled by this factor once they pass it.
_RESCALE_AT = 1e280
_LOG_RESCALE = math.log(_RESCALE_AT)


@dataclass(frozen=True, eq=False)
class KernelDistribution:
    r: np.ndarray = field(repr=False)
    tail_mass: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ValidationError("kernel must be a non-empty vector")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValidationError("kernel entries must be finite and nonnegative")
        if r[0] <= 0:
            raise ValidationError("kernel needs r_0 > 0")
        if self.tail_mass < 0 or abs(math.fsum(r) + self.tail_mass - 1.0) > 1e-12:
            raise ValidationError(
                f"kernel mass {math.fsum(r)!r} + tail {self.tail_mass!r} is not 1"
            )
        object.__setattr__(self, "r", r)

    @classmethod
    def from_pi(cls, pi) -> "KernelDistribution":
        return cls(pi.probs, pi.tail_mass)

    def __call__(self, z: float) -> float:
        """Truncated generating function r(z)."""
        return float(np.polynomial.polynomial.polyval(z, self.r))

    def derivative(self, z: float) -> float:
        if self.r.size == 1:
            return 0.0
        dr = self.r[1:] * np.arange(1, self.r.size)
        return float(np.polynomial.polynomial.polyval(z, dr))


@dataclass(frozen=True)
class GammaMoments:
    """Factorial moments of the kernel; ``tail_mass`` is the unaccounted mass."""

    gamma_1: float
    gamma_2: float
    gamma_3: float
    tail_mass: float = 0.0


@dataclass(frozen=True, eq=False)
class RecurrenceSolution:
    """``q`` holds Q_0..Q_kmax (``inf`` past double range); ``log_q`` never overflows."""

    q: np.ndarray = field(repr=False)
    log_q: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.q)

    def __getitem__(self, k):
        return self.q[k]

    def normalized(self, delta: float) -> np.ndarray:
        """Q_k * delta**k, formed in log space."""
        k = np.arange(len(self.q))
        return np.exp(self.log_q + k * math.log(delta))


@dataclass(frozen=True)
class Prediction:
    regime: Regime
    value: float
    increment: Optional[float] = None
    slope: Optional[float] = None
    # Q_0 / (1 - r'(delta)); Q_k * delta**k tends to this when gamma_1 > 1
    normalized_limit: Optional[float] = None
    delta: Optional[float] = None
    log_caveat: bool = False


def solve_q(kernel: KernelDistribution, q0: float, k_max: int) -> RecurrenceSolution:
    """Solve the recurrence forward for Q_0..Q_{k_max}.

    Row k of the recurrence is solved for Q_{k+1}:
    ``Q_{k+1} = (Q_k - sum_{i=1}^{k} r_i Q_{k-i+1}) / r_0``.
    """
    if k_max < 1:
        raise ValidationError(f"k_max must be >= 1, got {k_max}")
    if q0 <= 0:
        raise ValidationError(f"seed Q_0 must be > 0, got {q0}")
    r = kernel.r
    r0 = r[0]
    if r0 < R0_FLOOR:
        raise IllConditionedError(f"r_0 = {r0!r} is below {R0_FLOOR}")

    work = np.empty(k_max + 1)
    mant = np.empty(k_max + 1)
    scale = np.zeros(k_max + 1)
    work[0] = mant[0] = q0
    log_scale = 0.0
    depth = r.size - 1
    for k in range(k_max):
        m = min(k, depth)
        acc = work[k]
        if m:
            acc -= float(np.dot(r[1 : m + 1], work[k - m + 1 : k + 1][::-1]))
        nxt = acc / r0
        if nxt > _RESCALE_AT:
            work[: k + 1] /= _RESCALE_AT
            nxt /= _RESCALE_AT
            log_scale += _LOG_RESCALE
        work[k + 1] = mant[k + 1] = nxt
        scale[k + 1] = log_scale
    log_q = np.log(mant) + scale
    with np.errstate(over="ignore"):
        q = np.where(scale == 0.0, mant, np.exp(log_q))
    return RecurrenceSolution(q=q, log_q=log_q)


def gamma_moments(kernel: KernelDistribution) -> GammaMoments:
    i = np.arange(kernel.r.size, dtype=float)
    r = kernel.r
    return GammaMoments(
        gamma_1=math.fsum(i * r),
        gamma_2=math.fsum(i * (i - 1) * r),
        gamma_3=math.fsum(i * (i - 1) * (i - 2) * r),
        tail_mass=kernel.tail_mass,
    )


def bracketed_root(f, df, lo, hi, xtol=1e-13):
    """Bisection on a sign-changing bracket, then one Newton step.

    The Newton step is kept only if it stays inside the final bracket and
    does not increase ``|f|``.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    fx = f(x)
    d = df(x)
    if d != 0:
        y = x - fx / d
        if lo <= y <= hi and abs(f(y)) <= abs(fx):
            return y
    return x


def find_upper_bracket(f, sign=-1, max_halvings=60):
    """First point ``1 - 2**-j`` (j = 1, 2, ...) where ``f`` has the given sign."""
    for j in range(1, max_halvings + 1):
        z = 1.0 - 2.0**-j
        if f(z) * sign > 0:
            return z
    raise BracketError("no sign change found on (0, 1)")


def least_root(kernel: KernelDistribution) -> float:
    """The root of ``r(z) = z`` in (0, 1); exists only when gamma_1 > 1."""
    g = gamma_moments(kernel)
    if classify_load(g.gamma_1) is not Regime.SUPERCRITICAL:
        raise RegimeError(f"least root in (0,1) needs gamma_1 > 1, got {g.gamma_1!r}")

    def f(z):
        return kernel(z) - z

    def df(z):
        return kernel.derivative(z) - 1.0

    hi = find_upper_bracket(f)
    return bracketed_root(f, df, 0.0, hi)


def predict(kernel: KernelDistribution, q0: float, k: int) -> Prediction:
    g = gamma_moments(kernel)
    regime = classify_load(g.gamma_1)
    if regime is Regime.SUBCRITICAL:
        return Prediction(regime, q0 / (1.0 - g.gamma_1))
    if regime is Regime.CRITICAL:
        if g.gamma_2 <= 0:
            raise RegimeError("critical kernel with gamma_2 = 0 is degenerate")
        slope = 2.0 * q0 / g.gamma_2
        r = kernel.r
        r01 = r[0] + (r[1] if r.size > 1 else 0.0)
        increment = slope if r01 < 1.0 else None
        return Prediction(
            regime,
            slope * k,
            increment=increment,
            slope=slope,
            log_caveat=math.isfinite(g.gamma_3),
        )
    delta = least_root(kernel)
    norm = q0 / (1.0 - kernel.derivative(delta))
    log_main = math.log(norm) - k * math.log(delta)
    main = math.exp(log_main) if log_main < 709 else math.inf
    return Prediction(
        regime,
        main + q0 / (1.0 - g.gamma_1),
        normalized_limit=norm,
        delta=delta,
    )


def critical_deviation(kernel: KernelDistribution, q0: float, k_max: int) -> np.ndarray:
    """``Q_k - 2 Q_0 k / gamma_2`` for k = 0..k_max, for inspecting the log-order term."""
    g = gamma_moments(kernel)
    sol = solve_q(kernel, q0, k_max)
    return sol.q - 2.0 * q0 * np.arange(k_max + 1) / g.gamma_2
