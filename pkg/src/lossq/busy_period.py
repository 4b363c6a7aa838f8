"""Exact busy-period expectations and the stationary loss probability.

For a fixed number of waiting places K the expected busy period solves

    E T_K = sum_{j=0}^{K} pi_j E T_{K-j+1},   E T_0 = b,

and the other expectations follow from Wald's identity:

    E P = E T / b,   E M = p E P,   E R = (rho - 1) E P + 1.

With a random number of places the expectations are averaged over the
distribution of zeta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LossqError, ValidationError
from .packetization import ZetaPmf
from .service_models import DEFAULT_TAIL_TOL, ServiceDistribution, pi_probs
from .tauberian import KernelDistribution, RecurrenceSolution, solve_q


@dataclass(frozen=True)
class BusyPeriodCharacteristics:
    e_t: float
    e_p: float
    e_m: float
    e_r: float
    p_mark: float
    rho: float

    @property
    def e_l(self) -> float:
        """Expected lost messages per busy period (refused plus marked)."""
        return self.e_r + self.e_m


def _check_inputs(lam, p):
    if not lam > 0:
        raise ValidationError(f"arrival rate must be > 0, got {lam}")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"marking probability must lie in [0, 1], got {p}")


def busy_period_solution(
    K_max: int, lam: float, dist: ServiceDistribution, tail_tol: float = DEFAULT_TAIL_TOL
) -> RecurrenceSolution:
    """E T_K for K = 0..K_max (at least K = 0, 1)."""
    if K_max < 0:
        raise ValidationError(f"capacity must be >= 0, got {K_max}")
    # row K only reads pi_0..pi_K, so keep at least that many terms
    pi = pi_probs(dist, lam, tail_tol=tail_tol, min_terms=K_max + 1)
    return solve_q(KernelDistribution.from_pi(pi), dist.mean, max(K_max, 1))


def _from_busy_time(e_t, lam, dist, p):
    b = dist.mean
    rho = lam * b
    e_p = e_t / b
    e_r = (rho - 1.0) * e_p + 1.0 if math.isfinite(e_p) else math.copysign(math.inf, rho - 1.0)
    return BusyPeriodCharacteristics(
        e_t=e_t, e_p=e_p, e_m=p * e_p, e_r=e_r, p_mark=p, rho=rho
    )


def characteristics_table(
    K_max: int, lam: float, dist: ServiceDistribution, p: float = 0.0
) -> list[BusyPeriodCharacteristics]:
    """fixed_characteristics for every K in 0..K_max from a single recurrence pass."""
    _check_inputs(lam, p)
    sol = busy_period_solution(K_max, lam, dist)
    return [_from_busy_time(float(sol.q[K]), lam, dist, p) for K in range(K_max + 1)]


def fixed_characteristics(
    K: int, lam: float, dist: ServiceDistribution, p: float = 0.0
) -> BusyPeriodCharacteristics:
    """Busy-period expectations of the system with exactly K waiting places."""
    _check_inputs(lam, p)
    if K == 0:
        return _from_busy_time(dist.mean, lam, dist, p)
    sol = busy_period_solution(K, lam, dist)
    return _from_busy_time(float(sol.q[K]), lam, dist, p)


def mixture_characteristics(
    zeta: ZetaPmf, lam: float, dist: ServiceDistribution, p: float = 0.0
) -> BusyPeriodCharacteristics:
    """Busy-period expectations averaged over the distribution of zeta."""
    _check_inputs(lam, p)
    table = characteristics_table(zeta.upper, lam, dist, p)[zeta.lower :]
    e_t = zeta.expect([c.e_t for c in table])
    e_p = zeta.expect([c.e_p for c in table])
    e_r = zeta.expect([c.e_r for c in table])
    mixed = BusyPeriodCharacteristics(
        e_t=e_t, e_p=e_p, e_m=p * e_p, e_r=e_r, p_mark=p, rho=table[0].rho
    )
    _verify_identities(mixed, lam, dist)
    return mixed


def _verify_identities(c: BusyPeriodCharacteristics, lam, dist, rtol=1e-9):
    if not math.isfinite(c.e_p):
        return
    scale = max(1.0, abs(c.e_p))
    if abs(c.e_p - lam / c.rho * c.e_t) > rtol * scale:
        raise LossqError(f"E P = (lam/rho) E T violated: {c}")
    if abs(c.e_r - ((c.rho - 1.0) * c.e_p + 1.0)) > rtol * scale:
        raise LossqError(f"E R = (rho-1) E P + 1 violated: {c}")


def loss_probability(chars: BusyPeriodCharacteristics) -> float:
    """Pi = (E R + p E P) / (E R + E P)."""
    p = chars.p_mark
    if math.isfinite(chars.e_p) and math.isfinite(chars.e_r):
        return (chars.e_r + p * chars.e_p) / (chars.e_r + chars.e_p)
    # E R / E P -> rho - 1 once the busy period overflows double range
    ratio = chars.rho - 1.0
    return (ratio + p) / (ratio + 1.0)


def loss_probability_curve(
    K_max: int, lam: float, dist: ServiceDistribution, p: float = 0.0
) -> np.ndarray:
    """Pi_K for K = 0..K_max."""
    return np.array([loss_probability(c) for c in characteristics_table(K_max, lam, dist, p)])
