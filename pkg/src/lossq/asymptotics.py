"""Large-buffer predictions for busy-period expectations and loss probability.

Quantities used throughout:

* ``phi``: least root in (0, 1) of ``z = beta(lam - lam z)`` (only for rho > 1),
* ``slope = 1 + lam beta'(lam - lam phi)``,
* ``E phi^zeta``: computed exactly from the zeta pmf,
* ``rho2_tilde``: the second traffic moment at unit load, ``E[X^2] / b^2``,
* heavy traffic: ``rho = 1 + eps`` with ``C = eps * E zeta`` and ``D = p / eps``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import RegimeError, ValidationError
from .packetization import ZetaPmf
from .regime import CRITICAL_TOL, Regime, classify_load
from .service_models import ServiceDistribution, lst, lst_deriv, traffic_moments
from .tauberian import bracketed_root, find_upper_bracket

# Pointwise stand-ins for the limits eps -> 0, eps*E zeta -> C, p/eps -> D.
HEAVY_TRAFFIC_EPS = 0.1
C_ZERO = 0.05
D_INFINITE = 100.0


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    rho: float
    epsilon: float
    mean_zeta: Optional[float]
    C: Optional[float]
    D: Optional[float]
    rho2: float
    rho2_tilde: float
    rho3: float
    phi: Optional[float] = None
    slope: Optional[float] = None
    applicability_flags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HeavyTrafficPrediction:
    e_p: float
    e_r: float
    phi_expansion: float
    slope_expansion: float


def _zeta_mean(zeta: Union[ZetaPmf, int, float, None]) -> Optional[float]:
    if zeta is None:
        return None
    if isinstance(zeta, ZetaPmf):
        return zeta.mean
    return float(zeta)


def _e_phi_zeta(phi: float, zeta: Union[ZetaPmf, int]) -> float:
    if isinstance(zeta, ZetaPmf):
        return zeta.pgf(phi)
    return phi ** int(zeta)


def phi_root(lam: float, dist: ServiceDistribution) -> tuple[float, float]:
    """Return ``(phi, 1 + lam beta'(lam - lam phi))`` for rho > 1."""
    rho = lam * dist.mean
    if classify_load(rho) is not Regime.SUPERCRITICAL:
        raise RegimeError(f"phi in (0,1) exists only for rho > 1, got rho={rho!r}")

    def f(z):
        return z - lst(dist, lam - lam * z)

    def df(z):
        return 1.0 + lam * lst_deriv(dist, lam - lam * z, 1)

    hi = find_upper_bracket(f, sign=+1)
    phi = bracketed_root(f, df, 0.0, hi)
    return phi, 1.0 + lam * lst_deriv(dist, lam - lam * phi, 1)


def rho2_tilde(dist: ServiceDistribution) -> float:
    """Second traffic moment at unit load: E[X^2] / b^2."""
    return dist.moment(2) / dist.mean**2


def classify(
    lam: float,
    dist: ServiceDistribution,
    zeta: Union[ZetaPmf, int, float, None] = None,
    p: float = 0.0,
    heavy_traffic_eps: float = HEAVY_TRAFFIC_EPS,
    c_zero: float = C_ZERO,
) -> RegimeReport:
    """Regime of the system plus the constants the predictions need.

    Loads in ``(1, 1 + heavy_traffic_eps]`` are reported as heavy traffic,
    with ``C = eps * E zeta`` deciding between the two heavy-traffic cases.
    ``phi`` is filled in only for the plain supercritical regime.
    """
    tm = traffic_moments(dist, lam, j_max=3)
    rho = tm.rho
    eps = rho - 1.0
    mean = _zeta_mean(zeta)
    base = classify_load(rho)
    flags = {
        "rho2_finite": math.isfinite(tm.rho2),
        "rho3_finite": math.isfinite(tm.rho3),
        "C_is_pointwise": True,
    }
    C = D = None
    phi = slope = None
    regime = base
    if base is Regime.SUPERCRITICAL:
        D = p / eps
        if mean is not None:
            C = eps * mean
        if eps <= heavy_traffic_eps and C is not None:
            regime = Regime.HEAVY_TRAFFIC_C if C >= c_zero else Regime.HEAVY_TRAFFIC_ZERO
        else:
            phi, slope = phi_root(lam, dist)
    return RegimeReport(
        regime=regime,
        rho=rho,
        epsilon=eps,
        mean_zeta=mean,
        C=C,
        D=D,
        rho2=tm.rho2,
        rho2_tilde=rho2_tilde(dist),
        rho3=tm.rho3,
        phi=phi,
        slope=slope,
        applicability_flags=flags,
    )


def ep_asymptote(lam: float, dist: ServiceDistribution, zeta: Union[ZetaPmf, int]) -> float:
    """Large-buffer prediction of the expected number processed per busy period."""
    rho = lam * dist.mean
    regime = classify_load(rho)
    if regime is Regime.SUBCRITICAL:
        return 1.0 / (1.0 - rho)
    if regime is Regime.CRITICAL:
        rho2 = traffic_moments(dist, lam).rho2
        return 2.0 / rho2 * _zeta_mean(zeta)
    phi, slope = phi_root(lam, dist)
    return 1.0 / (_e_phi_zeta(phi, zeta) * slope) + 1.0 / (1.0 - rho)


def er_asymptote(lam: float, dist: ServiceDistribution, zeta: Union[ZetaPmf, int]) -> float:
    """Large-buffer prediction of the expected number refused per busy period."""
    rho = lam * dist.mean
    regime = classify_load(rho)
    if regime is Regime.SUBCRITICAL:
        return 0.0
    if regime is Regime.CRITICAL:
        return 1.0
    phi, slope = phi_root(lam, dist)
    return (rho - 1.0) / (_e_phi_zeta(phi, zeta) * slope)


def heavy_traffic(
    epsilon: float, C: float, rho2_tilde: float, mean_zeta: Optional[float] = None
) -> HeavyTrafficPrediction:
    """Expansions for rho = 1 + epsilon with epsilon * E zeta -> C.

    For ``C == 0`` the processed count needs ``mean_zeta``.
    """
    if not epsilon > 0:
        raise RegimeError(f"heavy traffic needs epsilon > 0, got {epsilon}")
    if C < 0:
        raise ValidationError(f"C must be >= 0, got {C}")
    if rho2_tilde <= 0:
        raise ValidationError(f"rho2_tilde must be > 0, got {rho2_tilde}")
    phi_exp = 1.0 - 2.0 * epsilon / rho2_tilde
    if C == 0:
        if mean_zeta is None:
            raise ValidationError("C = 0 prediction of E P needs mean_zeta")
        return HeavyTrafficPrediction(
            e_p=2.0 / rho2_tilde * mean_zeta, e_r=1.0, phi_expansion=phi_exp, slope_expansion=epsilon
        )
    growth = math.exp(2.0 * C / rho2_tilde)
    return HeavyTrafficPrediction(
        e_p=(growth - 1.0) / epsilon, e_r=growth, phi_expansion=phi_exp, slope_expansion=epsilon
    )


def heavy_traffic_loss(p: float, epsilon: float, C: float, rho2_tilde: float) -> float:
    """(D + e^x / (e^x - 1)) * eps with x = 2C / rho2_tilde, D = p / eps."""
    x = 2.0 * C / rho2_tilde
    return p + epsilon / -math.expm1(-x)


def loss_asymptote(
    report: RegimeReport,
    p: float,
    zeta: Union[ZetaPmf, int, None] = None,
    corrections: bool = True,
) -> float:
    """Predicted stationary loss probability for the regime in ``report``.

    ``zeta`` is needed for the supercritical formula (through ``E phi^zeta``);
    elsewhere only ``report.mean_zeta`` is used.  With ``corrections=False``
    the critical case returns the bare limit ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    if report.D is not None and report.epsilon > 0:
        if not math.isclose(report.D, p / report.epsilon, rel_tol=1e-9, abs_tol=1e-15):
            raise ValidationError(
                f"report has D={report.D!r} but p/eps = {p / report.epsilon!r}"
            )
    regime = report.regime
    if regime is Regime.SUBCRITICAL:
        return p
    if regime is Regime.CRITICAL:
        if not corrections:
            return p
        _need_mean(report)
        return p + (1.0 - p) * report.rho2 / (2.0 * report.mean_zeta)
    if regime is Regime.HEAVY_TRAFFIC_C:
        if report.D is not None and report.D > D_INFINITE:
            return p
        return heavy_traffic_loss(p, report.epsilon, report.C, report.rho2_tilde)
    if regime is Regime.HEAVY_TRAFFIC_ZERO:
        _need_mean(report)
        if report.D is not None and report.D > D_INFINITE:
            return p
        return p + report.rho2_tilde / (2.0 * report.mean_zeta)
    # plain supercritical: main term, the o(E phi^zeta) remainder dropped
    if zeta is None:
        raise ValidationError("supercritical loss prediction needs the zeta pmf or n")
    rho = report.rho
    g = _e_phi_zeta(report.phi, zeta) * report.slope
    return (p + rho - 1.0) / rho * ((rho - 1.0) + p * g) / ((rho - 1.0) + g)


def _need_mean(report):
    if report.mean_zeta is None:
        raise ValidationError("this prediction needs E zeta")


def critical_loss_small_p(p: float, N: int, rho2: float, mean_zeta: float) -> float:
    """Critical-load loss when p vanishes with the buffer.

    ``p N -> C > 0`` gives ``C/N + rho2 / (2 E zeta)``; with ``p N -> 0`` the
    same expression drops to ``rho2 / (2 E zeta)`` up to O(p).  Both are the
    value below, since ``C/N`` is ``p`` evaluated pointwise.
    """
    return p + rho2 / (2.0 * mean_zeta)


def fixed_capacity_increments(n: int, lam: float, dist: ServiceDistribution, p: float) -> tuple[float, float]:
    """Predicted ``E P_{n+1} - E P_n`` and ``Pi_{n+1} - Pi_n`` at rho = 1."""
    rho = lam * dist.mean
    if abs(rho - 1.0) >= CRITICAL_TOL:
        raise RegimeError(f"capacity increments need rho = 1, got {rho!r}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    a = 2.0 / traffic_moments(dist, lam).rho2
    d_pi = (a * (p - 1.0) / (n * (n + 1))) / ((a + 1.0 / (n + 1)) * (a + 1.0 / n))
    return a, d_pi


def check_rho3(report: RegimeReport, bound: float) -> bool:
    """True when rho_3 is within ``bound``; warns otherwise (never raises)."""
    ok = math.isfinite(report.rho3) and report.rho3 <= bound
    if not ok:
        warnings.warn(f"rho_3 = {report.rho3!r} exceeds {bound}; heavy-traffic terms may not apply")
    return ok
