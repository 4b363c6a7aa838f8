import math

import pytest

from lossq.asymptotics import (
    check_rho3,
    classify,
    critical_loss_small_p,
    ep_asymptote,
    er_asymptote,
    fixed_capacity_increments,
    heavy_traffic,
    heavy_traffic_loss,
    loss_asymptote,
    phi_root,
    rho2_tilde,
)
from lossq.busy_period import characteristics_table, fixed_characteristics, loss_probability
from lossq.errors import RegimeError, ValidationError
from lossq.packetization import PacketLaw, ZetaPmf, zeta_pmf
from lossq.regime import Regime
from lossq.service_models import ServiceDistribution

from oracles import brentq_phi, mm1_phi

MM1 = ServiceDistribution.exponential(1.0)


@pytest.mark.parametrize("lam", [1.5, 2.0, 4.0])
def test_phi_mm1(lam):
    phi, slope = phi_root(lam, MM1)
    assert phi == pytest.approx(mm1_phi(lam), abs=1e-13)
    assert slope == pytest.approx((lam - 1.0) / lam, rel=1e-12)


@pytest.mark.parametrize(
    "dist, lam",
    [
        (ServiceDistribution.deterministic(1.0), 1.6),
        (ServiceDistribution.erlang(3, 1.0), 2.5),
        (ServiceDistribution.uniform(0.5, 1.5), 1.2),
        (ServiceDistribution.hyperexponential([0.4, 0.6], [2.0, 0.5]), 1.3),
    ],
    ids=["det", "erl", "unif", "hyp"],
)
def test_phi_against_brent(dist, lam):
    phi, _ = phi_root(lam, dist)
    assert phi == pytest.approx(brentq_phi(dist.kind.value, dist.params, lam), abs=1e-11)


@pytest.mark.parametrize("lam", [0.5, 1.0])
def test_phi_needs_overload(lam):
    with pytest.raises(RegimeError):
        phi_root(lam, MM1)


def test_ep_limits():
    assert ep_asymptote(0.5, MM1, 10) == pytest.approx(2.0)
    assert ep_asymptote(1.0, MM1, ZetaPmf.degenerate(100)) == pytest.approx(100.0)
    n = 5
    assert ep_asymptote(2.0, MM1, n) == pytest.approx(2.0 ** (n + 1) / 1.0 + 1.0 / (1.0 - 2.0))


def test_er_limits():
    assert er_asymptote(0.5, MM1, 10) == 0.0
    assert er_asymptote(1.0, ServiceDistribution.uniform(0, 2), 7) == 1.0
    assert er_asymptote(2.0, MM1, 5) == pytest.approx(64.0, rel=1e-12)


def test_er_asymptote_with_random_zeta_uses_pgf():
    zeta = zeta_pmf(PacketLaw.uniform(1, 2), 3)
    expected = 1.0 / zeta.pgf(0.5) / 0.5  # (rho-1)/(E phi^zeta * slope) at rho = 2
    assert er_asymptote(2.0, MM1, zeta) == pytest.approx(expected, rel=1e-12)


def test_subcritical_er_vanishes():
    t = characteristics_table(60, 0.5, MM1)
    # (rho - 1) E P + 1 cancels two O(1) terms, so only ~1e-14 is resolvable
    assert t[60].e_r == pytest.approx(0.0, abs=1e-13)
    assert t[10].e_r == pytest.approx(0.5**11, rel=1e-9)


def test_supercritical_error_envelope():
    dist, lam = ServiceDistribution.erlang(2, 1.0), 1.5
    phi, _ = phi_root(lam, dist)
    table = characteristics_table(14, lam, dist)
    err = [abs(table[n].e_r - er_asymptote(lam, dist, n)) for n in range(1, 13)]
    assert all(b < a for a, b in zip(err, err[1:]))
    rel = [e / table[n].e_r for n, e in zip(range(1, 13), err)]
    rates = [b / a for a, b in zip(rel, rel[1:])]
    assert max(rates) <= 2 * phi / (1 + phi)


def test_heavy_traffic_values():
    ht = heavy_traffic(0.01, 1.0, 2.0)
    assert ht.e_r == pytest.approx(math.e)
    assert ht.e_p == pytest.approx((math.e - 1) / 0.01)
    assert ht.phi_expansion == pytest.approx(0.99)
    zero = heavy_traffic(0.01, 0.0, 2.0, mean_zeta=30.0)
    assert zero.e_r == 1.0 and zero.e_p == pytest.approx(30.0)


def test_heavy_traffic_needs_overload():
    with pytest.raises(RegimeError):
        heavy_traffic(0.0, 1.0, 2.0)


@pytest.mark.parametrize("eps", [0.04, 0.02, 0.01])
def test_phi_expansion_order(eps):
    lam = 1.0 + eps
    phi, slope = phi_root(lam, MM1)
    assert abs(phi - (1 - 2 * eps / rho2_tilde(MM1))) <= 2 * eps**2
    assert slope == pytest.approx(eps, rel=2 * eps)


def test_classify_regimes():
    z = ZetaPmf.degenerate(50)
    assert classify(0.5, MM1, z).regime is Regime.SUBCRITICAL
    assert classify(1.0, MM1, z).regime is Regime.CRITICAL
    assert classify(1.02, MM1, z).regime is Regime.HEAVY_TRAFFIC_C
    assert classify(1.0005, MM1, z).regime is Regime.HEAVY_TRAFFIC_ZERO
    r = classify(2.0, MM1, z, p=0.1)
    assert r.regime is Regime.SUPERCRITICAL and r.phi == pytest.approx(0.5)
    assert r.D == pytest.approx(0.1)


def test_loss_subcritical_and_critical():
    z = ZetaPmf.degenerate(50)
    assert loss_asymptote(classify(0.8, MM1, z), 0.05, z) == 0.05
    crit = loss_asymptote(classify(1.0, MM1, z), 0.0, z)
    assert crit == pytest.approx(0.02)
    assert loss_probability(fixed_characteristics(50, 1.0, MM1)) == pytest.approx(1 / 52)
    assert loss_asymptote(classify(1.0, MM1, z), 0.0, z, corrections=False) == 0.0


def test_loss_heavy_traffic_case_i():
    # D = 0 and large C: coefficient e^x/(e^x-1) -> 1, so Pi ~ eps
    eps = 0.05
    assert heavy_traffic_loss(0.0, eps, 200.0, 2.0) == pytest.approx(eps, rel=1e-12)
    z = ZetaPmf.degenerate(40)
    rep = classify(1.0 + eps, MM1, z, p=0.01)
    x = 2 * rep.C / rep.rho2_tilde
    assert loss_asymptote(rep, 0.01, z) == pytest.approx((0.01 / eps + math.exp(x) / math.expm1(x)) * eps)


def test_loss_inconsistent_D():
    z = ZetaPmf.degenerate(40)
    rep = classify(1.05, MM1, z, p=0.01)
    with pytest.raises(ValidationError):
        loss_asymptote(rep, 0.02, z)


def test_loss_supercritical_tracks_exact():
    z = ZetaPmf.degenerate(30)
    rep = classify(2.0, MM1, z, p=0.05)
    exact = loss_probability(fixed_characteristics(30, 2.0, MM1, 0.05))
    assert loss_asymptote(rep, 0.05, z) == pytest.approx(exact, rel=1e-9)


def test_critical_small_p():
    assert critical_loss_small_p(0.001, 100, 2.0, 100.0) == pytest.approx(0.011)


def test_capacity_increments():
    dP, dPi = fixed_capacity_increments(10, 1.0, MM1, 0.0)
    assert dP == pytest.approx(1.0)
    assert dPi == pytest.approx((-1 / 110) / ((1 + 1 / 11) * (1 + 1 / 10)))
    exact = 1 / 13 - 1 / 12
    assert abs(dPi - exact) < 2e-3
    for n in (1, 5, 50):
        assert fixed_capacity_increments(n, 1.0, MM1, 0.3)[1] < 0
    with pytest.raises(RegimeError):
        fixed_capacity_increments(10, 0.9, MM1, 0.0)


def test_increment_error_shrinks_faster_than_n_squared():
    errs = []
    for n in (10, 40, 160):
        _, dPi = fixed_capacity_increments(n, 1.0, MM1, 0.0)
        exact = 1 / (n + 3) - 1 / (n + 2)
        errs.append(abs(dPi - exact) * n**2)
    assert errs[0] > errs[1] > errs[2]


def test_rho3_warning():
    rep = classify(1.0, ServiceDistribution.hyperexponential([0.01, 0.99], [50.0, 0.5]), 10)
    with pytest.warns(UserWarning):
        assert not check_rho3(rep, 10.0)
