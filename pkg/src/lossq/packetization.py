"""Number of message slots an N-packet buffer offers when message sizes are random.

A buffer of ``N`` packets holds ``zeta = max{m : nu_1 + ... + nu_m <= N}``
messages, where ``nu_i`` are iid packet counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ValidationError


@dataclass(frozen=True, eq=False)
class PacketLaw:
    """Distribution of packets per message on ``values`` (positive integers)."""

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ValidationError("packet law needs matching, non-empty values and probs")
        values = tuple(int(v) for v in self.values)
        if any(v != orig for v, orig in zip(values, self.values)):
            raise ValidationError("packet counts must be integers")
        if any(v < 1 for v in values):
            raise ValidationError("packet counts must be >= 1")
        if len(set(values)) != len(values):
            raise ValidationError("packet counts must be distinct")
        probs = tuple(float(p) for p in self.probs)
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ValidationError("packet probabilities must be finite and >= 0")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValidationError(f"packet probabilities sum to {math.fsum(probs)!r}, not 1")
        order = sorted(range(len(values)), key=values.__getitem__)
        object.__setattr__(self, "values", tuple(values[i] for i in order))
        object.__setattr__(self, "probs", tuple(probs[i] for i in order))

    @classmethod
    def fixed(cls, l: int) -> "PacketLaw":
        return cls((l,), (1.0,))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "PacketLaw":
        n = hi - lo + 1
        return cls(tuple(range(lo, hi + 1)), (1.0 / n,) * n)

    @property
    def lower(self) -> int:
        return self.values[0]

    @property
    def upper(self) -> int:
        return self.values[-1]

    @property
    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    def pmf_array(self) -> np.ndarray:
        """Dense pmf indexed 0..upper."""
        out = np.zeros(self.upper + 1)
        out[list(self.values)] = self.probs
        return out

    def shifted(self, k: int) -> "PacketLaw":
        """Every message carries ``k`` more packets."""
        return PacketLaw(tuple(v + k for v in self.values), self.probs)

    def __eq__(self, other):
        if not isinstance(other, PacketLaw):
            return NotImplemented
        return self.values == other.values and self.probs == other.probs

    def __hash__(self):
        return hash((self.values, self.probs))

    def __repr__(self):
        pairs = ", ".join(f"{v}: {p:g}" for v, p in zip(self.values, self.probs))
        return f"PacketLaw({{{pairs}}})"


@dataclass(frozen=True, eq=False)
class ZetaPmf:
    """P{zeta = K} for K in ``lower..upper``; ``N`` is None for a bare point mass."""

    N: Optional[int]
    lower: int
    upper: int
    probs: np.ndarray = field(repr=False)
    mean: float

    @classmethod
    def degenerate(cls, K: int) -> "ZetaPmf":
        return cls(N=None, lower=K, upper=K, probs=np.ones(1), mean=float(K))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lower, self.upper + 1)

    def prob(self, K: int) -> float:
        if K < self.lower or K > self.upper:
            return 0.0
        return float(self.probs[K - self.lower])

    def expect(self, values) -> float:
        """E f(zeta) for ``values[j] = f(lower + j)``."""
        return math.fsum(np.asarray(values, dtype=float) * self.probs)

    def pgf(self, z: float) -> float:
        """E z**zeta."""
        return self.expect(np.power(float(z), self.support.astype(float)))

    def is_degenerate(self) -> bool:
        return self.lower == self.upper


def _check(nu: PacketLaw, N: int):
    if int(N) != N or N < 1:
        raise ValidationError(f"buffer size must be a positive integer, got {N}")
    if N < nu.lower:
        raise ConfigurationError(
            f"buffer of {N} packets cannot hold any message (smallest is {nu.lower})",
            field="model.N",
        )


def zeta_bounds(nu: PacketLaw, N: int) -> tuple[int, int]:
    _check(nu, N)
    return N // nu.upper, N // nu.lower


def zeta_pmf(nu: PacketLaw, N: int) -> ZetaPmf:
    """Distribution of zeta(N) by dynamic programming over partial sums.

    ``f[s] = P{nu_1 + ... + nu_m = s}`` restricted to ``s <= N``; then
    ``P{zeta = m} = sum_s f[s] P{nu_{m+1} > N - s}``.
    """
    _check(nu, N)
    N = int(N)
    lo, hi = zeta_bounds(nu, N)
    pmf = nu.pmf_array()
    # survival[j] = P{nu > j} for j = 0..N, summed from the top so it hits 0 exactly
    above = np.append(np.cumsum(pmf[::-1])[::-1][1:], 0.0)
    survival = np.zeros(N + 1)
    m = min(N + 1, above.size)
    survival[:m] = above[:m]
    survival_rev = survival[::-1]  # survival_rev[s] = P{nu > N - s}

    f = np.zeros(N + 1)
    f[0] = 1.0
    probs = np.zeros(hi + 1)
    for count in range(hi + 1):
        probs[count] = float(np.dot(f, survival_rev))
        if count == hi:
            break
        f = np.convolve(f, pmf)[: N + 1]
    probs = probs[lo:]
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-12:
        raise ValidationError(f"zeta pmf mass {total!r} drifted from 1")
    probs = probs / total
    mean = math.fsum(np.arange(lo, hi + 1) * probs)
    return ZetaPmf(N=N, lower=lo, upper=hi, probs=probs, mean=mean)
