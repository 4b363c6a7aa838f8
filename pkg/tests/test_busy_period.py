import math
from fractions import Fraction

import numpy as np
import pytest

from lossq.busy_period import (
    BusyPeriodCharacteristics,
    characteristics_table,
    fixed_characteristics,
    loss_probability,
    loss_probability_curve,
    mixture_characteristics,
)
from lossq.errors import ValidationError
from lossq.packetization import PacketLaw, ZetaPmf, zeta_pmf
from lossq.service_models import ServiceDistribution

from oracles import mm1_busy_time_fraction

MM1 = ServiceDistribution.exponential(1.0)


def test_mm1_critical_small_k():
    c = fixed_characteristics(3, 1.0, MM1)
    assert (c.e_t, c.e_p, c.e_r) == pytest.approx((4.0, 4.0, 1.0), abs=1e-12)


@pytest.mark.parametrize(
    "dist",
    [MM1, ServiceDistribution.deterministic(0.7), ServiceDistribution.uniform(0.1, 0.5)],
    ids=["exp", "det", "unif"],
)
def test_zero_capacity_is_one_service(dist):
    assert fixed_characteristics(0, 1.3, dist).e_t == dist.mean


def test_mm1_overloaded_single_place():
    c = fixed_characteristics(1, 2.0, MM1)
    assert (c.e_t, c.e_p, c.e_r) == pytest.approx((3.0, 3.0, 4.0), rel=1e-12)
    assert loss_probability(c) == pytest.approx(4 / 7, rel=1e-12)


@pytest.mark.parametrize("lam", [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(3)])
def test_mm1_against_birth_death(lam):
    table = characteristics_table(60, float(lam), MM1)
    for K in (0, 1, 5, 17, 60):
        ref = mm1_busy_time_fraction(K, lam, Fraction(1))
        assert table[K].e_t == pytest.approx(float(ref), rel=1e-11)


def test_mixture_of_point_mass_equals_fixed():
    a = mixture_characteristics(ZetaPmf.degenerate(6), 0.9, MM1, 0.1)
    b = fixed_characteristics(6, 0.9, MM1, 0.1)
    assert a.e_t == pytest.approx(b.e_t, rel=1e-14)
    assert a.e_r == pytest.approx(b.e_r, rel=1e-14)


def test_mixture_weighted_sum():
    zeta = zeta_pmf(PacketLaw.uniform(1, 2), 3)
    c = mixture_characteristics(zeta, 1.0, MM1)
    assert c.e_t == pytest.approx(0.25 * 2 + 0.625 * 3 + 0.125 * 4, rel=1e-12)
    assert c.e_r == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("K, expected", [(4, 1 / 6), (10, 1 / 12), (50, 1 / 52)])
def test_loss_mm1_critical(K, expected):
    assert loss_probability(fixed_characteristics(K, 1.0, MM1)) == pytest.approx(expected, rel=1e-11)


def test_loss_all_marked():
    c = BusyPeriodCharacteristics(e_t=2.0, e_p=2.0, e_m=2.0, e_r=0.3, p_mark=1.0, rho=0.7)
    assert loss_probability(c) == 1.0


@pytest.mark.parametrize("p", [0.0, 0.05, 0.5])
@pytest.mark.parametrize(
    "dist",
    [MM1, ServiceDistribution.erlang(2, 1.0), ServiceDistribution.hyperexponential([0.5, 0.5], [0.5, 1.5])],
    ids=["exp", "erl", "hyp"],
)
def test_wald_identities(dist, p):
    for lam in (0.6, 1.0, 1.4):
        for c in characteristics_table(30, lam, dist, p):
            assert c.e_m == pytest.approx(p * c.e_p)
            assert c.e_r == pytest.approx((c.rho - 1.0) * c.e_p + 1.0, rel=1e-12, abs=1e-12)


def test_subcritical_loss_tends_to_p():
    curve = loss_probability_curve(200, 0.5, MM1, 0.03)
    assert curve[-1] == pytest.approx(0.03, abs=1e-12)
    assert np.all(np.diff(curve) <= 1e-15)


def test_overflowing_busy_period_keeps_loss_finite():
    c = fixed_characteristics(1200, 3.0, MM1, 0.1)
    assert math.isinf(c.e_t)
    assert loss_probability(c) == pytest.approx((2.0 + 0.1) / 3.0)


@pytest.mark.parametrize("lam, p", [(0.0, 0.1), (-1.0, 0.1), (1.0, 1.5)])
def test_bad_inputs(lam, p):
    with pytest.raises(ValidationError):
        fixed_characteristics(3, lam, MM1, p)
