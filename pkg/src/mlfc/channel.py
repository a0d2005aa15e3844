"""Fading-gain models and seeded Monte Carlo estimators.

Gains are power gains ``|h|^2`` with the noise variance normalized to one,
so the SNR of a node transmitting with power ``P`` over gain ``g`` is
``g * P``.

Random streams are Philox generators keyed by ``seed XOR blake2b(label)``
(64-bit). A statistic drawn for the same model, subgroup size and label
therefore sees the same samples regardless of which experiment or sweep
point asked for it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModel

_MASK64 = (1 << 64) - 1
# cap on gains drawn per chunk; keeps memory flat for large subgroups
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class FadingModel:
    """Distribution of the channel power gain.

    ``family`` is ``rayleigh_unit`` (exponential with mean 1),
    ``exponential`` (mean ``mean``) or ``constant`` (always ``gain``).
    """

    family: str = "rayleigh_unit"
    mean: float = 1.0
    gain: float = 0.0

    def __post_init__(self):
        if self.family not in ("rayleigh_unit", "exponential", "constant"):
            raise ValueError(f"unknown fading family {self.family!r}")
        if self.family == "rayleigh_unit" and self.mean != 1.0:
            raise ValueError("rayleigh_unit has mean 1")
        if self.family == "exponential" and not self.mean > 0:
            raise ValueError("exponential mean must be > 0")
        if self.family == "constant" and not self.gain >= 0:
            raise ValueError("constant gain must be >= 0")

    @classmethod
    def rayleigh_unit(cls):
        return cls("rayleigh_unit")

    @classmethod
    def exponential(cls, mean):
        return cls("exponential", mean=float(mean))

    @classmethod
    def constant(cls, gain):
        return cls("constant", gain=float(gain))

    @property
    def is_exponential(self):
        return self.family in ("rayleigh_unit", "exponential")

    @property
    def average_gain(self):
        return self.gain if self.family == "constant" else self.mean

    @property
    def key(self):
        if self.family == "rayleigh_unit":
            return "rayleigh_unit"
        if self.family == "exponential":
            return f"exponential({self.mean!r})"
        return f"constant({self.gain!r})"

    def sample(self, rng, shape):
        if self.family == "constant":
            return np.full(shape, self.gain)
        return rng.exponential(self.mean, size=shape)


@dataclass(frozen=True)
class McConfig:
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with its standard error.

    ``analytic`` holds the exact value when a closed form exists.
    """

    value: float
    std_error: float
    samples: int = 0
    analytic: float | None = None


def label_hash(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


def make_stream(seed: int, label: str) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, label)``."""
    key = (int(seed) ^ label_hash(label)) & _MASK64
    return np.random.Generator(np.random.Philox(key=key))


def sample_gains(model: FadingModel, count: int, stream: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return model.sample(stream, count)


def estimate(model: FadingModel, K: int, mc: McConfig, statistic, label: str) -> Estimate:
    """Sample mean of ``statistic`` over ``mc.samples`` rows of K i.i.d. gains.

    ``statistic`` maps a ``(rows, K)`` gain array to ``rows`` values. Rows
    are drawn in fixed-size chunks and folded with the pairwise mean/M2
    update, so the result depends only on ``(model, K, mc, label)``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    n = int(mc.samples)
    if model.family == "constant":
        value = float(statistic(np.full((1, K), model.gain))[0])
        return Estimate(value, 0.0, n)

    rng = make_stream(mc.seed, f"{label}|{model.key}|K={K}")
    rows = max(1, _CHUNK_ELEMENTS // K)
    count, mean, m2 = 0, 0.0, 0.0
    while count < n:
        size = min(rows, n - count)
        values = np.asarray(statistic(model.sample(rng, (size, K))), dtype=float)
        c_mean = float(values.mean())
        c_m2 = float(((values - c_mean) ** 2).sum())
        total = count + size
        delta = c_mean - mean
        mean += delta * size / total
        m2 += c_m2 + delta * delta * count * size / total
        count = total
    var = m2 / (n - 1) if n > 1 else 0.0
    return Estimate(mean, math.sqrt(var / n), n)


def _row_min(gains):
    return gains.min(axis=1)


def _row_min_over_first(gains):
    return gains.min(axis=1) / gains[:, 0]


def expected_min_gain(model: FadingModel, K: int, mc: McConfig) -> Estimate:
    """E[min of K i.i.d. gains]; exponential(mu) also carries the exact mu/K."""
    est = estimate(model, K, mc, _row_min, "min_gain")
    if model.is_exponential:
        return Estimate(est.value, est.std_error, est.samples, model.mean / K)
    if model.family == "constant":
        return Estimate(model.gain, 0.0, est.samples, model.gain)
    return est


def min_over_self_ratio_closed_form(K: int) -> float:
    """E[min_i X_i / X_1] for K i.i.d. exponentials (any common mean).

    With ``Y`` the minimum of the other ``K - 1`` gains,
    ``P(Y / X_1 > s) = 1 / (1 + (K - 1) s)``; integrating over ``s`` in
    ``[0, 1]`` gives ``ln K / (K - 1)``.
    """
    if K == 1:
        return 1.0
    return math.log(K) / (K - 1)


def expected_min_over_self_ratio(model: FadingModel, K: int, mc: McConfig) -> Estimate:
    """E[min_i X_i / X_j] where X_j is one of the K gains being minimized."""
    if model.family == "constant" and model.gain == 0:
        raise DegenerateModel("ratio statistic undefined for a zero constant gain")
    if K == 1 or model.family == "constant":
        return Estimate(1.0, 0.0, int(mc.samples), 1.0)
    est = estimate(model, K, mc, _row_min_over_first, "min_over_self")
    return Estimate(est.value, est.std_error, est.samples, min_over_self_ratio_closed_form(K))
