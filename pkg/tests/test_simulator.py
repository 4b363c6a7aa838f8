import math

import numpy as np
import pytest

from lossq.busy_period import fixed_characteristics, mixture_characteristics
from lossq.errors import DegenerateComparisonError, RunawaySimulationError, ValidationError
from lossq.packetization import PacketLaw
from lossq.service_models import ServiceDistribution
from lossq.simulator import (
    SimConfig,
    ZetaMode,
    agreement,
    compare,
    ratio_estimate,
    run,
    worker_count,
)

from oracles import birth_death_iid_busy_time

MM1 = ServiceDistribution.exponential(1.0)
CYCLES = 100_000


def cfg(**kw):
    base = dict(lam=1.0, dist=MM1, nu=PacketLaw.fixed(1), N=4, p=0.0, n_busy_periods=CYCLES, seed=11)
    base.update(kw)
    return SimConfig(**base)


def test_mm1_critical_matches_recurrence():
    est = run(cfg())
    rep = compare(est, fixed_characteristics(4, 1.0, MM1))
    assert rep.passed, rep.z
    assert abs(est.pi_hat - 1 / 6) <= 3 * est.se_pi


def test_mm1_overloaded_single_place():
    est = run(cfg(lam=2.0, N=1))
    assert abs(est.e_r - 4.0) <= 3 * est.se_e_r
    assert abs(est.e_t - 3.0) <= 3 * est.se_e_t


def test_no_marking_means_no_marks():
    est = run(cfg(p=0.0))
    assert est.marked == 0 and est.e_m == 0.0


def test_conservation_per_cycle():
    est = run(cfg(lam=1.3, nu=PacketLaw.uniform(1, 2), N=6, p=0.1))
    assert est.conservation_violations == 0
    assert est.arrivals == est.served + est.refused
    assert 0.0 <= est.pi_hat <= 1.0


def test_bitwise_determinism():
    a = run(cfg(replications=2, n_busy_periods=20_000))
    b = run(cfg(replications=2, n_busy_periods=20_000))
    assert np.array_equal(a.batches, b.batches)
    assert a.pi_hat == b.pi_hat


def test_seed_changes_output():
    a = run(cfg(n_busy_periods=5_000, seed=1))
    b = run(cfg(n_busy_periods=5_000, seed=2))
    assert not np.array_equal(a.batches, b.batches)


def test_replications_independent_of_thread_count(monkeypatch):
    monkeypatch.setenv("LOSSQ_THREADS", "1")
    serial = run(cfg(replications=3, n_busy_periods=10_000))
    monkeypatch.setenv("LOSSQ_THREADS", "3")
    assert worker_count(3) == 3
    threaded = run(cfg(replications=3, n_busy_periods=10_000))
    assert np.array_equal(serial.batches, threaded.batches)
    # replications draw from distinct streams
    r0, r1 = serial.per_replication[:2]
    assert r0.e_t != r1.e_t


def test_worker_count_cap(monkeypatch):
    monkeypatch.setenv("LOSSQ_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count(1) == 1


@pytest.mark.parametrize("lam", [0.8, 1.3])
def test_fixed_per_cycle_matches_mixture(lam):
    c = cfg(lam=lam, nu=PacketLaw.uniform(1, 2), N=6, p=0.05, zeta_mode=ZetaMode.FIXED_PER_RUN)
    est = run(c)
    assert compare(est, mixture_characteristics(c.zeta(), lam, MM1, 0.05)).passed


@pytest.mark.parametrize("lam", [0.8, 1.0, 1.3])
def test_iid_mode_matches_birth_death_chain(lam):
    c = cfg(lam=lam, nu=PacketLaw.uniform(1, 2), N=6, zeta_mode=ZetaMode.IID_PER_ARRIVAL)
    z = c.zeta()
    ref = birth_death_iid_busy_time(lam, 1.0, z.support, z.probs)
    est = run(c)
    assert abs(est.e_t - ref) <= 3 * est.se_e_t


@pytest.mark.parametrize("mode", list(ZetaMode))
@pytest.mark.parametrize("lam", [0.8, 1.3])
def test_wald_identities(mode, lam):
    est = run(cfg(lam=lam, nu=PacketLaw.uniform(1, 2), N=6, p=0.1, zeta_mode=mode))
    frac, se = est.mark_fraction()
    assert abs(frac - 0.1) <= 3 * se
    resid, se = est.refusal_residual(lam)
    assert abs(resid) <= 3 * se


def test_compare_flags_wrong_model():
    est = run(cfg(lam=1.2))
    rep = compare(est, fixed_characteristics(4, 1.0, MM1))
    assert not rep.passed
    assert max(abs(z) for z in rep.z.values()) > 3


def test_compare_degenerate_standard_error():
    est = run(cfg(n_busy_periods=2_000))
    wrong = fixed_characteristics(4, 1.0, MM1, 0.5)
    with pytest.raises(DegenerateComparisonError):
        compare(est, wrong)


def test_agreement_of_identical_runs_is_zero():
    a = run(cfg(n_busy_periods=5_000))
    assert all(v == 0.0 for v in agreement(a, a).values())


def test_runaway_guard():
    with pytest.raises(RunawaySimulationError):
        run(cfg(lam=3.0, N=200, n_busy_periods=10, max_events_per_cycle=1_000))


def test_ratio_estimate():
    num = np.array([1.0, 2.0, 3.0, 4.0])
    den = np.array([2.0, 2.0, 2.0, 2.0])
    r, se = ratio_estimate(num, den)
    assert r == pytest.approx(1.25)
    assert se == pytest.approx(np.std(num / 2.0, ddof=1) / 2.0)


@pytest.mark.parametrize("kw", [dict(n_busy_periods=0), dict(replications=0), dict(p=1.2), dict(lam=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValidationError):
        cfg(**kw)
