"""Regenerative Monte Carlo of the single-server loss system.

Each replication simulates independent busy cycles (busy period followed by
the idle period).  An arrival that finds ``n`` messages is accepted iff
``n <= zeta_i``; accepted messages are marked with probability ``p`` and are
still served.  ``zeta_i`` is either drawn per arrival (``iid_per_arrival``)
or once per busy cycle and held for every arrival of that cycle
(``fixed_per_run``).

Randomness comes from one Philox stream per (seed, replication, role) so
replications never share state and a given seed always reproduces the same
output bit for bit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numba
import numpy as np

from .busy_period import BusyPeriodCharacteristics, loss_probability
from .errors import DegenerateComparisonError, RunawaySimulationError, ValidationError
from .packetization import PacketLaw, ZetaPmf, zeta_pmf
from .service_models import ServiceDistribution

CHUNK = 1 << 16
DEFAULT_BATCHES = 50
MAX_EVENTS_PER_CYCLE = 10**9

# stream roles
_ARRIVALS, _SERVICES, _ZETA, _MARKS = range(4)

# per-batch accumulator columns
FIELDS = ("T", "P", "M", "R", "A", "C", "L", "L2", "n")
_T, _P, _M, _R, _A, _C, _L, _L2, _N = range(len(FIELDS))

# kernel return codes
_DONE, _RUNAWAY = 0, 5


class ZetaMode(str, Enum):
    IID_PER_ARRIVAL = "iid_per_arrival"
    FIXED_PER_RUN = "fixed_per_run"


@dataclass(frozen=True)
class SimConfig:
    lam: float
    dist: ServiceDistribution
    nu: PacketLaw
    N: int
    p: float = 0.0
    zeta_mode: ZetaMode = ZetaMode.IID_PER_ARRIVAL
    n_busy_periods: int = 10_000
    replications: int = 1
    seed: int = 0
    n_batches: int = DEFAULT_BATCHES
    max_events_per_cycle: int = MAX_EVENTS_PER_CYCLE

    def __post_init__(self):
        object.__setattr__(self, "zeta_mode", ZetaMode(self.zeta_mode))
        if not self.lam > 0:
            raise ValidationError(f"lam must be > 0, got {self.lam}")
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"p must lie in [0, 1], got {self.p}")
        if self.n_busy_periods < 1:
            raise ValidationError("n_busy_periods must be >= 1")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.n_batches < 2:
            raise ValidationError("n_batches must be >= 2")

    @property
    def rho(self) -> float:
        return self.lam * self.dist.mean

    def zeta(self) -> ZetaPmf:
        return zeta_pmf(self.nu, self.N)


@dataclass(frozen=True, eq=False)
class SimEstimate:
    """Cycle-average estimates with batch-means standard errors.

    ``batches`` has one row per batch (pooled over replications) and the
    columns listed in ``FIELDS``: sums of busy time, processed, marked,
    refused, arrivals, cycle length, lost, lost squared, and cycle count.
    """

    e_t: float
    e_p: float
    e_m: float
    e_r: float
    pi_hat: float
    se_e_t: float
    se_e_p: float
    se_e_m: float
    se_e_r: float
    se_pi: float
    n_cycles: int
    arrivals: int
    served: int
    refused: int
    marked: int
    conservation_violations: int
    var_lost: float
    batches: np.ndarray = field(repr=False)
    per_replication: tuple = field(default=(), repr=False)

    def mean_of(self, weights) -> tuple[float, float]:
        """Estimate and SE of E[sum_j w_j X_j] for per-cycle fields X_j."""
        w = np.zeros(len(FIELDS))
        for name, coef in weights.items():
            w[FIELDS.index(name)] = coef
        return ratio_estimate(self.batches @ w, self.batches[:, _N])

    def ratio_of(self, num: str, den: str) -> tuple[float, float]:
        return ratio_estimate(self.batches[:, FIELDS.index(num)], self.batches[:, FIELDS.index(den)])

    def mark_fraction(self) -> tuple[float, float]:
        """M/P with its SE; tends to p."""
        return self.ratio_of("M", "P")

    def refusal_residual(self, rho: float) -> tuple[float, float]:
        """R - ((rho - 1) P + 1) with its SE; tends to 0."""
        est, se = self.mean_of({"R": 1.0, "P": -(rho - 1.0)})
        return est - 1.0, se


def ratio_estimate(num_b, den_b) -> tuple[float, float]:
    """sum(num)/sum(den) with the delta-method SE over batches."""
    num_b = np.asarray(num_b, dtype=float)
    den_b = np.asarray(den_b, dtype=float)
    B = len(num_b)
    total = den_b.sum()
    if total == 0:
        return math.nan, math.nan
    r = float(num_b.sum() / total)
    resid = num_b - r * den_b
    se = math.sqrt(B / (B - 1) * float(np.dot(resid, resid))) / total if B > 1 else math.nan
    return r, se


@numba.njit(cache=True, nogil=True)
def _advance(st, ist, ia, sv, zb, mk, p, fixed_mode, n_cycles, n_batches, acc, max_events):
    """Run cycles until done or a random buffer is about to run dry.

    Returns 0 when ``n_cycles`` are complete, 1..4 for the stream that needs
    refilling (arrivals, services, zeta, marks), 5 on runaway.
    """
    # st: 0 remaining service, 1 time to next arrival, 2 busy time
    # ist: 0 n, 1 in_busy, 2 cycles, 3 cycle zeta, 4-7 buffer positions,
    #      8 events, 9 A, 10 S, 11 R, 12 M, 13 violations
    while ist[2] < n_cycles:
        if ist[4] + 1 >= ia.size:
            return 1
        if ist[5] + 1 >= sv.size:
            return 2
        if ist[6] + 1 >= zb.size:
            return 3
        if ist[7] + 1 >= mk.size:
            return 4
        if ist[1] == 0:
            # first arrival of the cycle finds the system empty
            if fixed_mode:
                ist[3] = zb[ist[6]]
                ist[6] += 1
            ist[9] = 1
            ist[10] = 0
            ist[11] = 0
            ist[12] = 0
            ist[8] = 0
            if mk[ist[7]] < p:
                ist[12] += 1
            ist[7] += 1
            ist[0] = 1
            st[0] = sv[ist[5]]
            ist[5] += 1
            st[1] = ia[ist[4]]
            ist[4] += 1
            st[2] = 0.0
            ist[1] = 1
            continue
        ist[8] += 1
        if ist[8] > max_events:
            return 5
        if st[1] < st[0]:
            st[0] -= st[1]
            st[2] += st[1]
            ist[9] += 1
            n = ist[0]
            if fixed_mode:
                z = ist[3]
            else:
                z = zb[ist[6]]
                ist[6] += 1
            if n <= z:
                ist[0] = n + 1
                if mk[ist[7]] < p:
                    ist[12] += 1
                ist[7] += 1
            else:
                ist[11] += 1
            st[1] = ia[ist[4]]
            ist[4] += 1
        else:
            st[1] -= st[0]
            st[2] += st[0]
            ist[10] += 1
            ist[0] -= 1
            if ist[0] > 0:
                st[0] = sv[ist[5]]
                ist[5] += 1
            else:
                # busy period over; the residual interarrival time is the idle period
                c = ist[2]
                b = c * n_batches // n_cycles
                lost = ist[11] + ist[12]
                acc[b, 0] += st[2]
                acc[b, 1] += ist[10]
                acc[b, 2] += ist[12]
                acc[b, 3] += ist[11]
                acc[b, 4] += ist[9]
                acc[b, 5] += st[2] + st[1]
                acc[b, 6] += lost
                acc[b, 7] += lost * lost
                acc[b, 8] += 1
                if ist[9] != ist[10] + ist[11]:
                    ist[13] += 1
                ist[2] += 1
                ist[1] = 0
                # the idle period ends with the next cycle's first arrival,
                # whose interarrival draw has already been consumed
    return 0


def _streams(seed: int, replication: int):
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replication, role))))
        for role in range(4)
    ]


def _refill(buf, pos, fresh):
    return np.concatenate((buf[pos:], fresh)), 0


def _run_replication(cfg: SimConfig, zeta: ZetaPmf, replication: int):
    rngs = _streams(cfg.seed, replication)
    n_batches = min(cfg.n_batches, cfg.n_busy_periods)
    support = zeta.support.astype(np.int64)

    def draw(role):
        g = rngs[role]
        if role == _ARRIVALS:
            return g.exponential(1.0 / cfg.lam, CHUNK)
        if role == _SERVICES:
            return np.asarray(cfg.dist.sample(g, CHUNK), dtype=float)
        if role == _ZETA:
            if zeta.is_degenerate():
                return np.full(CHUNK, support[0], dtype=np.int64)
            return g.choice(support, size=CHUNK, p=zeta.probs).astype(np.int64)
        return g.random(CHUNK)

    bufs = [draw(r) for r in range(4)]
    st = np.zeros(3)
    ist = np.zeros(14, dtype=np.int64)
    acc = np.zeros((n_batches, len(FIELDS)))
    fixed = cfg.zeta_mode is ZetaMode.FIXED_PER_RUN
    while True:
        code = _advance(
            st, ist, bufs[0], bufs[1], bufs[2], bufs[3], cfg.p, fixed,
            cfg.n_busy_periods, n_batches, acc, cfg.max_events_per_cycle,
        )
        if code == _DONE:
            break
        if code == _RUNAWAY:
            raise RunawaySimulationError(
                f"busy cycle {int(ist[2])} of replication {replication} exceeded "
                f"{cfg.max_events_per_cycle} events"
            )
        role = code - 1
        bufs[role], ist[4 + role] = _refill(bufs[role], ist[4 + role], draw(role))
    return acc, int(ist[13])


def _estimate(batches: np.ndarray, violations: int, per_rep=()) -> SimEstimate:
    n = batches[:, _N]
    est = {}
    for name, col in (("e_t", _T), ("e_p", _P), ("e_m", _M), ("e_r", _R)):
        est[name], est["se_" + name] = ratio_estimate(batches[:, col], n)
    pi_hat, se_pi = ratio_estimate(batches[:, _L], batches[:, _A])
    total = batches.sum(axis=0)
    n_cycles = int(total[_N])
    mean_l = total[_L] / n_cycles
    var_l = (total[_L2] - n_cycles * mean_l**2) / (n_cycles - 1) if n_cycles > 1 else math.nan
    return SimEstimate(
        pi_hat=pi_hat,
        se_pi=se_pi,
        n_cycles=n_cycles,
        arrivals=int(total[_A]),
        served=int(total[_P]),
        refused=int(total[_R]),
        marked=int(total[_M]),
        conservation_violations=violations,
        var_lost=var_l,
        batches=batches,
        per_replication=tuple(per_rep),
        **est,
    )


def worker_count(replications: int) -> int:
    cap = os.environ.get("LOSSQ_THREADS")
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, replications))


def run(config: SimConfig, zeta: Optional[ZetaPmf] = None) -> SimEstimate:
    """Simulate ``replications`` x ``n_busy_periods`` busy cycles.

    ``zeta`` overrides the pmf derived from ``(nu, N)``.
    """
    zeta = zeta if zeta is not None else config.zeta()
    reps = range(config.replications)
    workers = worker_count(config.replications)
    if workers == 1:
        results = [_run_replication(config, zeta, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _run_replication(config, zeta, r), reps))
    per_rep = [_estimate(acc, v) for acc, v in results]
    pooled = np.vstack([acc for acc, _ in results])
    return _estimate(pooled, sum(v for _, v in results), per_rep)


@dataclass(frozen=True)
class ComparisonReport:
    z: dict
    estimates: dict
    analytic: dict
    passed: bool
    threshold: float = 3.0


def compare(
    est: SimEstimate, analytic: BusyPeriodCharacteristics, threshold: float = 3.0
) -> ComparisonReport:
    """z-scores of each simulated expectation against its exact value."""
    pairs = {
        "e_t": (est.e_t, est.se_e_t, analytic.e_t),
        "e_p": (est.e_p, est.se_e_p, analytic.e_p),
        "e_m": (est.e_m, est.se_e_m, analytic.e_m),
        "e_r": (est.e_r, est.se_e_r, analytic.e_r),
        "pi": (est.pi_hat, est.se_pi, loss_probability(analytic)),
    }
    z = {}
    for name, (value, se, target) in pairs.items():
        diff = value - target
        if se == 0 or not math.isfinite(se):
            if abs(diff) > 1e-12 * max(1.0, abs(target)):
                raise DegenerateComparisonError(
                    f"{name}: estimate {value!r} vs {target!r} with zero standard error"
                )
            z[name] = 0.0
        else:
            z[name] = float(diff / se)
    return ComparisonReport(
        z=z,
        estimates={k: v[0] for k, v in pairs.items()},
        analytic={k: v[2] for k, v in pairs.items()},
        passed=all(abs(v) <= threshold for v in z.values()),
        threshold=threshold,
    )


def agreement(a: SimEstimate, b: SimEstimate) -> dict:
    """z-scores of the difference between two independent estimates."""
    out = {}
    for name in ("e_t", "e_p", "e_r"):
        d = getattr(a, name) - getattr(b, name)
        se = math.hypot(getattr(a, "se_" + name), getattr(b, "se_" + name))
        out[name] = d / se if se > 0 else (0.0 if d == 0 else math.inf)
    return out
