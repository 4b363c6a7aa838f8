"""Effect of redundant packets on the stationary message-loss probability.

Adding ``k`` redundant packets to an ``l``-packet message lets up to
``recover_threshold`` (default ``k``) corrupted packets be repaired, which
lowers the corruption probability from ``p`` to ``p_breve``.  It also makes
every message ``(l + k) / l`` times longer to transmit, raising the load.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from scipy import stats

from .asymptotics import (
    C_ZERO,
    HEAVY_TRAFFIC_EPS,
    classify,
    heavy_traffic_loss,
    loss_asymptote,
)
from .busy_period import loss_probability, mixture_characteristics
from .errors import LossqError, ValidationError
from .packetization import PacketLaw, zeta_pmf
from .regime import Regime
from .service_models import ServiceDistribution

NEUTRAL_RTOL = 1e-9
EXACT_ZETA_CAP = 20_000


class Verdict(str, Enum):
    DECREASE = "decrease"
    NEUTRAL = "neutral"
    INCREASE = "increase"
    CASE_ANALYSIS = "requires-case-analysis"
    BASELINE = "baseline"


def message_corruption_prob(q: float, l: int, k: int = 0, recover_threshold: Optional[int] = None) -> float:
    """P{more than ``recover_threshold`` of the ``l + k`` packets are corrupted}."""
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"q must lie in [0, 1], got {q}")
    if l < 1 or k < 0:
        raise ValidationError(f"need l >= 1 and k >= 0, got l={l}, k={k}")
    t = k if recover_threshold is None else recover_threshold
    if t < 0:
        raise ValidationError(f"recover_threshold must be >= 0, got {t}")
    if k == 0 and t == 0:
        return -math.expm1((l) * math.log1p(-q)) if q < 1 else 1.0
    return float(stats.binom.sf(t, l + k, q))


@dataclass(frozen=True)
class SystemPoint:
    """One operating point as the loss predictions see it."""

    rho: float
    p: float
    mean_zeta: Optional[float] = None
    rho2_tilde: Optional[float] = None
    label: str = ""

    @property
    def epsilon(self) -> float:
        return self.rho - 1.0

    @property
    def C(self) -> Optional[float]:
        if self.mean_zeta is None:
            return None
        return self.epsilon * self.mean_zeta

    def regime(self, heavy_traffic_eps=HEAVY_TRAFFIC_EPS, c_zero=C_ZERO) -> Regime:
        eps = self.epsilon
        if abs(eps) < 1e-9:
            return Regime.CRITICAL
        if eps < 0:
            return Regime.SUBCRITICAL
        if eps <= heavy_traffic_eps and self.C is not None:
            return Regime.HEAVY_TRAFFIC_C if self.C >= c_zero else Regime.HEAVY_TRAFFIC_ZERO
        return Regime.SUPERCRITICAL


@dataclass(frozen=True)
class RedundancyScenario:
    """Base system (``k_before`` redundant packets) against ``k`` redundant packets.

    ``nu`` is the packet law without redundancy; it defaults to exactly ``l``
    packets per message.  ``dist`` is the service law without redundancy.
    """

    q: float
    l: int
    lam: float
    dist: ServiceDistribution
    N: int
    k: int = 1
    k_before: int = 0
    nu: Optional[PacketLaw] = None
    recover_threshold: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValidationError(f"q must lie in [0, 1], got {self.q}")
        if self.l < 1 or self.k < 0 or self.k_before < 0:
            raise ValidationError("need l >= 1 and k, k_before >= 0")
        if self.recover_threshold is not None and self.recover_threshold > self.k:
            raise ValidationError("recover_threshold cannot exceed k")

    @property
    def base_nu(self) -> PacketLaw:
        return self.nu if self.nu is not None else PacketLaw.fixed(self.l)

    def corruption(self, k: int) -> float:
        t = self.recover_threshold if (self.recover_threshold is not None and k == self.k) else k
        return message_corruption_prob(self.q, self.l, k, t)

    def dist_at(self, k: int) -> ServiceDistribution:
        return self.dist.scaled((self.l + k) / self.l) if k else self.dist

    def nu_at(self, k: int) -> PacketLaw:
        return self.base_nu.shifted(k) if k else self.base_nu

    def point(self, k: int) -> SystemPoint:
        dist = self.dist_at(k)
        zeta = zeta_pmf(self.nu_at(k), self.N)
        return SystemPoint(
            rho=self.lam * dist.mean,
            p=self.corruption(k),
            mean_zeta=zeta.mean,
            rho2_tilde=dist.moment(2) / dist.mean**2,
            label=f"k={k}",
        )


@dataclass(frozen=True)
class ScenarioResult:
    regime_pair: tuple[Regime, Regime]
    loss_ratio: Optional[float]
    verdict: Verdict
    case_analysis: Optional[dict] = None


def _verdict(ratio: float) -> Verdict:
    if math.isclose(ratio, 1.0, rel_tol=NEUTRAL_RTOL):
        return Verdict.NEUTRAL
    return Verdict.DECREASE if ratio < 1.0 else Verdict.INCREASE


def _growth(C, rho2):
    return math.expm1(2.0 * C / rho2)


def heavy_traffic_ratio(before: SystemPoint, after: SystemPoint) -> float:
    """Loss ratio after/before when both points are heavy traffic with finite p/eps."""
    g, gb = _growth(before.C, before.rho2_tilde), _growth(after.C, after.rho2_tilde)
    num = gb * after.p + (gb + 1.0) * after.epsilon
    den = g * before.p + (g + 1.0) * before.epsilon
    return (g / gb) * num / den


def scenario_eval(before: SystemPoint, after: SystemPoint) -> ScenarioResult:
    """Compare two operating points through the large-buffer loss limits."""
    rb, ra = before.regime(), after.regime()
    pair = (rb, ra)
    low = (Regime.SUBCRITICAL, Regime.CRITICAL)
    if rb in low and ra in low:
        if before.p == 0.0:
            ratio = 1.0 if after.p == 0.0 else math.inf
        else:
            ratio = after.p / before.p
        return ScenarioResult(pair, ratio, _verdict(ratio))
    if rb in low and ra not in low:
        return ScenarioResult(pair, None, Verdict.CASE_ANALYSIS, _side_by_side(after))
    if rb is Regime.HEAVY_TRAFFIC_C and ra is Regime.HEAVY_TRAFFIC_C:
        ratio = heavy_traffic_ratio(before, after)
        return ScenarioResult(pair, ratio, _verdict(ratio))
    if rb not in low and ra not in low:
        num = before.rho * (after.p + after.rho - 1.0)
        den = after.rho * (before.p + before.rho - 1.0)
        ratio = num / den
        return ScenarioResult(pair, ratio, _verdict(ratio))
    # load dropped back to <= 1 while the base was overloaded
    if before.p + before.rho - 1.0 <= 0:
        raise LossqError("degenerate base loss")
    ratio = after.p * before.rho / (before.p + before.rho - 1.0)
    return ScenarioResult(pair, ratio, _verdict(ratio))


def _side_by_side(point: SystemPoint) -> dict:
    """Both heavy-traffic loss predictions for an overloaded point; neither is asserted."""
    out = {"heavy_traffic_C": None, "heavy_traffic_zero": None}
    if point.C is None or point.rho2_tilde is None or point.epsilon <= 0:
        return out
    out["heavy_traffic_C"] = heavy_traffic_loss(point.p, point.epsilon, point.C, point.rho2_tilde)
    out["heavy_traffic_zero"] = point.p + point.rho2_tilde / (2.0 * point.mean_zeta)
    return out


def evaluate(s: RedundancyScenario) -> ScenarioResult:
    return scenario_eval(s.point(s.k_before), s.point(s.k))


def break_even_gap(p, p_breve, eps, eps_breve, C, rho2_tilde) -> float:
    """(p - p_breve) - e^x/(e^x - 1) (eps_breve - eps), x = 2C/rho2_tilde.

    Positive means the extra packet lowers the loss, negative raises it.
    """
    if eps_breve <= eps:
        warnings.warn(
            f"eps_breve={eps_breve!r} <= eps={eps!r}: redundancy should raise the load",
            stacklevel=2,
        )
    coef = 1.0 / -math.expm1(-2.0 * C / rho2_tilde)
    return (p - p_breve) - coef * (eps_breve - eps)


@dataclass(frozen=True)
class SweepRow:
    k: int
    p_breve: float
    rho_breve: float
    regime: Regime
    pi_predicted: float
    pi_exact: Optional[float]
    verdict: Verdict


SWEEP_COLUMNS = ("k", "p_breve", "rho_breve", "regime", "pi_predicted", "pi_exact", "verdict")


def _predicted_loss(s: RedundancyScenario, k: int, point: SystemPoint) -> float:
    dist = s.dist_at(k)
    zeta = zeta_pmf(s.nu_at(k), s.N)
    report = classify(s.lam, dist, zeta, point.p)
    return loss_asymptote(report, point.p, zeta)


def _exact_loss(s: RedundancyScenario, k: int, p: float) -> Optional[float]:
    zeta = zeta_pmf(s.nu_at(k), s.N)
    if zeta.upper > EXACT_ZETA_CAP:
        return None
    chars = mixture_characteristics(zeta, s.lam, s.dist_at(k), p)
    return loss_probability(chars)


def sweep(base: RedundancyScenario, k_range) -> list[SweepRow]:
    """One row per k; each verdict compares k with the previous k in the range."""
    ks = list(k_range)
    if not ks:
        raise ValidationError("k_range must be non-empty")
    rows = []
    prev = None
    for k in ks:
        scen = replace(base, k=k, recover_threshold=None)
        point = scen.point(k)
        verdict = Verdict.BASELINE if prev is None else scenario_eval(prev, point).verdict
        rows.append(
            SweepRow(
                k=k,
                p_breve=point.p,
                rho_breve=point.rho,
                regime=point.regime(),
                pi_predicted=_predicted_loss(scen, k, point),
                pi_exact=_exact_loss(scen, k, point.p),
                verdict=verdict,
            )
        )
        prev = point
    return rows


def argmin_loss(rows: list[SweepRow]) -> int:
    """k with the smallest loss, preferring exact values where every row has one."""
    use_exact = all(r.pi_exact is not None for r in rows)
    key = (lambda r: r.pi_exact) if use_exact else (lambda r: r.pi_predicted)
    return min(rows, key=key).k


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow(
            [
                r.k,
                format(r.p_breve, ".17g"),
                format(r.rho_breve, ".17g"),
                r.regime.value,
                format(r.pi_predicted, ".17g"),
                "" if r.pi_exact is None else format(r.pi_exact, ".17g"),
                r.verdict.value,
            ]
        )
    return buf.getvalue()
