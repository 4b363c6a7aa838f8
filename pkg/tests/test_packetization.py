import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossq.errors import ConfigurationError, ValidationError
from lossq.packetization import PacketLaw, ZetaPmf, zeta_bounds, zeta_pmf

from oracles import brute_zeta_pmf


def test_fixed_law_is_degenerate():
    z = zeta_pmf(PacketLaw.fixed(3), 10)
    assert z.is_degenerate() and z.lower == 3 and z.mean == 3.0


def test_uniform_one_two_small_buffer():
    z = zeta_pmf(PacketLaw.uniform(1, 2), 3)
    assert (z.lower, z.upper) == (1, 3)
    assert z.probs == pytest.approx([0.25, 0.625, 0.125], abs=1e-15)


@pytest.mark.parametrize(
    "values, probs, N",
    [
        ((1, 2), (0.5, 0.5), 6),
        ((1, 2, 3), (0.2, 0.5, 0.3), 9),
        ((2, 5), (0.7, 0.3), 13),
        ((1, 4), (0.9, 0.1), 8),
        ((3,), (1.0,), 7),
    ],
)
def test_against_enumeration(values, probs, N):
    z = zeta_pmf(PacketLaw(values, probs), N)
    ref = brute_zeta_pmf(values, probs, N)
    assert set(ref) <= set(range(z.lower, z.upper + 1))
    for m in range(z.lower, z.upper + 1):
        assert z.prob(m) == pytest.approx(ref.get(m, 0.0), abs=1e-14)


def test_bounds():
    assert zeta_bounds(PacketLaw.uniform(2, 5), 21) == (4, 10)


def test_buffer_smaller_than_any_message():
    with pytest.raises(ConfigurationError) as exc:
        zeta_pmf(PacketLaw.fixed(4), 3)
    assert exc.value.field == "model.N"


@pytest.mark.parametrize(
    "values, probs",
    [((1, 2), (0.5, 0.4)), ((0, 2), (0.5, 0.5)), ((1, 1), (0.5, 0.5)), ((1.5,), (1.0,))],
)
def test_bad_packet_laws(values, probs):
    with pytest.raises(ValidationError):
        PacketLaw(values, probs)


def test_packet_law_sorted_and_shifted():
    law = PacketLaw((3, 1), (0.4, 0.6))
    assert law.values == (1, 3)
    assert law.shifted(2) == PacketLaw((3, 5), (0.6, 0.4))
    assert law.mean == pytest.approx(1.8)


def test_large_buffer_mean_tracks_renewal_rate():
    law = PacketLaw.uniform(1, 3)
    z = zeta_pmf(law, 3000)
    # E zeta(N) ~ N / E nu for large N
    assert z.mean == pytest.approx(3000 / law.mean, rel=2e-3)
    assert z.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_pgf_and_expect():
    z = zeta_pmf(PacketLaw.uniform(1, 2), 3)
    assert z.pgf(1.0) == pytest.approx(1.0)
    assert z.pgf(0.5) == pytest.approx(0.25 * 0.5 + 0.625 * 0.25 + 0.125 * 0.125)
    assert ZetaPmf.degenerate(4).pgf(0.5) == pytest.approx(1 / 16)


@settings(max_examples=40, deadline=None)
@given(
    data=st.lists(st.tuples(st.integers(1, 5), st.floats(0.05, 1.0)), min_size=1, max_size=3, unique_by=lambda t: t[0]),
    N=st.integers(5, 12),
)
def test_enumeration_property(data, N):
    values = tuple(v for v, _ in data)
    w = np.array([p for _, p in data])
    probs = tuple(w / w.sum())
    law = PacketLaw(values, probs)
    if N < law.lower:
        return
    z = zeta_pmf(law, N)
    ref = brute_zeta_pmf(law.values, law.probs, N)
    got = {m: z.prob(m) for m in range(z.lower, z.upper + 1)}
    for m in set(got) | set(ref):
        assert got.get(m, 0.0) == pytest.approx(ref.get(m, 0.0), abs=1e-12)
