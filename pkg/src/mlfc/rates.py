"""Achievable computation rates.

All logarithms are base 2 and rates are in bits per channel use (function
values per channel use up to the entropy factor, which cancels everywhere).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .channel import (Estimate, FadingModel, McConfig, estimate, expected_min_gain,
                      expected_min_over_self_ratio, make_stream, min_over_self_ratio_closed_form)
from .errors import EmptySubgroup, ShapeMismatch, SimplexViolation
from .topology import HierarchicalNetwork, SubgroupKey

SIMPLEX_TOL = 1e-9


def c_plus(x):
    """``max(log2(x) / 2, 0)``; zero for ``x`` in ``[0, 1]``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("c_plus needs x >= 0")
    out = np.where(x > 1.0, 0.5 * np.log2(np.maximum(x, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def capacity(x):
    """``log2(1 + x)``."""
    out = np.log2(1.0 + np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def subgroup_rate_instant(gains, powers):
    """Per-channel-use rate of one subgroup: ``c_plus(1/K + min_i g_i P_i)``.

    ``gains`` and ``powers`` are length-K vectors, or ``(uses, K)`` arrays
    for a vector of per-use rates.
    """
    gains = np.asarray(gains, dtype=float)
    powers = np.broadcast_to(np.asarray(powers, dtype=float), gains.shape)
    if gains.shape[-1] == 0:
        raise EmptySubgroup("subgroup has no nodes")
    if np.any(gains < 0) or np.any(powers < 0):
        raise ValueError("gains and powers must be >= 0")
    K = gains.shape[-1]
    return c_plus(1.0 / K + (gains * powers).min(axis=-1))


def apc_gain_factor(min_gain, ratio, P):
    """``E[min g] * P / E[min g / g_self]``, the adaptive-power SNR scale."""
    return min_gain * P / ratio


def apc_term(p, K, eps):
    """Weighted subgroup term ``p * c_plus(1/K + eps/p)`` under adaptive power; 0 at p = 0."""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0, p, 1.0)
    out = np.where(p > 0, safe * c_plus(1.0 / K + eps / safe), 0.0)
    return float(out) if out.ndim == 0 else out


class ChannelStats:
    """Cached channel statistics for one fading model and Monte Carlo setting.

    The minimum-gain mean uses its exact closed form whenever the model has
    one. The ratio statistic is always estimated unless ``closed_forms`` is
    set, in which case the exponential closed form is used instead.
    """

    def __init__(self, model: FadingModel, mc: McConfig, closed_forms: bool = False):
        self.model = model
        self.mc = mc
        self.closed_forms = closed_forms
        self._cache = {}
        self.accessed = None

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        if self.accessed is not None:
            self.accessed.add(key)
        return self._cache[key]

    def track(self):
        """Start recording which statistics are read; returns the (live) key set."""
        self.accessed = set()
        return self.accessed

    def overridden(self, key, value):
        """Copy sharing this cache except for statistic ``key`` set to ``value``."""
        twin = ChannelStats(self.model, self.mc, self.closed_forms)
        twin._cache = dict(self._cache)
        old = self._cache[key]
        twin._cache[key] = Estimate(value, old.std_error, old.samples, old.analytic)
        return twin

    def min_gain(self, K) -> Estimate:
        def compute():
            if self.model.is_exponential:
                exact = self.model.mean / K
                return Estimate(exact, 0.0, 0, exact)
            return expected_min_gain(self.model, K, self.mc)
        return self._cached(("min_gain", K), compute)

    def ratio(self, K) -> Estimate:
        def compute():
            if self.closed_forms and self.model.is_exponential:
                exact = min_over_self_ratio_closed_form(K)
                return Estimate(exact, 0.0, 0, exact)
            return expected_min_over_self_ratio(self.model, K, self.mc)
        return self._cached(("ratio", K), compute)

    def fpc_rate_exact(self, K, P) -> Estimate:
        """Monte Carlo E[c_plus(1/K + min g * P)]; same draws for every P."""
        return self._cached(("fpc_exact", K, float(P)),
                            lambda: estimate(self.model, K, self.mc,
                                             lambda g: c_plus(1.0 / K + g.min(axis=1) * P),
                                             "fpc_rate"))

    def improved_ts(self, K1, P) -> Estimate:
        def compute():
            est = estimate(self.model, 1, self.mc,
                           lambda g: capacity(g[:, 0] * K1 * P), "improved_ts")
            analytic = None
            if self.model.is_exponential:
                analytic = expected_log_capacity_exponential(self.model.mean * K1 * P)
            elif self.model.family == "constant":
                analytic = capacity(self.model.gain * K1 * P)
            return Estimate(est.value, est.std_error, est.samples, analytic)
        return self._cached(("improved_ts", K1, float(P)), compute)


def expected_log_capacity_exponential(scale):
    """E[log2(1 + scale * X)] for X ~ Exp(1): ``exp(1/s) E1(1/s) / ln 2``."""
    from scipy.special import exp1

    if scale <= 0:
        return 0.0
    a = 1.0 / scale
    if a > 700:
        # exp(a) overflows; use the asymptotic series e^a E1(a) ~ sum (-1)^n n! / a^(n+1)
        term, total = 1.0 / a, 0.0
        for n in range(12):
            total += term
            term *= -(n + 1) / a
        return total / math.log(2)
    return math.exp(a) * float(exp1(a)) / math.log(2)


def _jensen_rate(K, P, min_gain: Estimate) -> Estimate:
    arg = 1.0 / K + min_gain.value * P
    value = c_plus(arg)
    slope = P / (2 * math.log(2) * arg) if arg > 1 else 0.0
    return Estimate(value, abs(slope) * min_gain.std_error, min_gain.samples, None)


def subgroup_rate_expected(model: FadingModel, K: int, P: float, mode: str, mc: McConfig,
                           stats: ChannelStats | None = None) -> Estimate:
    """Expected subgroup rate at fixed power ``P``.

    ``mode="exact_expectation"`` averages instantaneous rates over gain draws;
    ``mode="jensen_bound"`` moves the expectation inside: ``c_plus(1/K + E[min g] P)``.
    """
    if K < 1:
        raise EmptySubgroup("K must be >= 1")
    if P < 0:
        raise ValueError("P must be >= 0")
    stats = stats or ChannelStats(model, mc)
    if mode == "exact_expectation":
        return stats.fpc_rate_exact(K, P)
    if mode == "jensen_bound":
        return _jensen_rate(K, P, stats.min_gain(K))
    raise ValueError(f"unknown mode {mode!r}")


def _check_simplex(values, what):
    values = np.asarray(list(values), dtype=float)
    if np.any(values < -SIMPLEX_TOL) or np.any(values > 1 + SIMPLEX_TOL):
        raise SimplexViolation(f"{what} has entries outside [0, 1]")
    if abs(values.sum() - 1.0) > SIMPLEX_TOL:
        raise SimplexViolation(f"{what} sums to {values.sum()!r}, not 1")


def group_rate(subgroup_rates, betas) -> float:
    """``min_c beta_c * R_c``."""
    subgroup_rates = list(subgroup_rates)
    betas = list(betas)
    if len(subgroup_rates) != len(betas) or not betas:
        raise ShapeMismatch("need one fraction per subgroup")
    _check_simplex(betas, "subgroup fractions")
    return min(b * r for b, r in zip(betas, subgroup_rates))


@dataclass(frozen=True)
class Allocation:
    """Time fractions: ``alpha[(l, k)]`` per group, ``beta[(l, k, c)]`` within a group."""

    alpha: Mapping
    beta: Mapping

    def validate(self, net: HierarchicalNetwork | None = None):
        _check_simplex(self.alpha.values(), "group fractions")
        by_group = {}
        for (l, k, c), b in self.beta.items():
            by_group.setdefault((l, k), []).append(b)
        for key, betas in by_group.items():
            _check_simplex(betas, f"subgroup fractions of {key}")
        if set(by_group) != set(self.alpha):
            raise ShapeMismatch("alpha and beta cover different groups")
        if net is not None:
            if set(self.alpha) != set(net.group_keys()):
                raise ShapeMismatch("allocation groups do not match the network")
            if set(self.beta) != set(net.subgroup_keys()):
                raise ShapeMismatch("allocation subgroups do not match the network")
        return self

    def product(self, key: SubgroupKey) -> float:
        return self.alpha[key[:2]] * self.beta[key]

    def products(self) -> dict:
        return {key: self.product(key) for key in self.beta}

    @classmethod
    def uniform(cls, net: HierarchicalNetwork):
        """Average time allocation: equal share per group, equal share per subgroup."""
        groups = list(net.group_keys())
        alpha = {key: 1.0 / len(groups) for key in groups}
        beta = {}
        for l, k in groups:
            C = net.num_subgroups(l, k)
            for c in range(C):
                beta[(l, k, c)] = 1.0 / C
        return cls(alpha, beta)

    @classmethod
    def from_products(cls, net: HierarchicalNetwork, p: Mapping):
        """Recover (alpha, beta) from fused fractions ``p = alpha * beta``."""
        alpha, beta = {}, {}
        for l, k in net.group_keys():
            keys = [(l, k, c) for c in range(net.num_subgroups(l, k))]
            a = math.fsum(p[key] for key in keys)
            alpha[(l, k)] = a
            for key in keys:
                beta[key] = p[key] / a if a > 0 else 1.0 / len(keys)
        return cls(alpha, beta)


@dataclass
class RateReport:
    subgroup_rates: dict
    group_rates: dict
    group_terms: dict
    rate: float
    bottleneck: SubgroupKey | None
    std_error: float = 0.0
    extra: dict = field(default_factory=dict)

    def bottleneck_label(self):
        if self.bottleneck is None:
            return ""
        return "{}:{}:{}".format(*self.bottleneck)


def network_rate(net: HierarchicalNetwork, allocation: Allocation,
                 subgroup_rates: Mapping[SubgroupKey, float]) -> RateReport:
    """Nested minimum over layers, groups and subgroups of ``alpha * beta * R``.

    Virtual relays carry no term. Ties keep the first key in layer/group/
    subgroup enumeration order as the bottleneck.
    """
    allocation.validate(net)
    keys = list(net.subgroup_keys())
    missing = [key for key in keys if key not in subgroup_rates]
    if missing:
        raise ShapeMismatch(f"no subgroup rate for {missing[:3]}")
    group_rates, group_terms = {}, {}
    best, best_key = math.inf, None
    for l, k in net.group_keys():
        inner, inner_key = math.inf, None
        for c in range(net.num_subgroups(l, k)):
            v = allocation.beta[(l, k, c)] * subgroup_rates[(l, k, c)]
            if v < inner:
                inner, inner_key = v, (l, k, c)
        group_rates[(l, k)] = inner
        term = allocation.alpha[(l, k)] * inner
        group_terms[(l, k)] = term
        if term < best:
            best, best_key = term, inner_key
    return RateReport(dict((key, subgroup_rates[key]) for key in keys), group_rates,
                      group_terms, max(best, 0.0), best_key)


def fixed_power(P):
    """Power policy where every node transmits at ``P`` on each of its uses."""
    def policy(gains, key, product):
        return np.full(gains.shape, float(P))
    return policy


def network_rate_empirical(net: HierarchicalNetwork, allocation: Allocation, model: FadingModel,
                           n: int, seed: int,
                           power_policy: Callable | None = None, P: float | None = None) -> RateReport:
    """Rate from sampled channel uses rather than expectations.

    Subgroup ``(l, k, c)`` gets ``round(alpha * beta * n)`` channel uses with
    fresh gains; its rate is the average instantaneous rate over those uses.
    ``power_policy(gains, key, product)`` returns per-use per-node powers; the
    default is fixed power ``P``.
    """
    if power_policy is None:
        if P is None:
            raise ValueError("need P or a power policy")
        power_policy = fixed_power(P)
    allocation.validate(net)
    rates = {}
    for key in net.subgroup_keys():
        product = allocation.product(key)
        uses = int(round(product * n))
        if uses == 0:
            rates[key] = 0.0
            continue
        K = len(net.subgroup(key))
        rng = make_stream(seed, "empirical|{}|{}|{}".format(*key))
        gains = model.sample(rng, (uses, K))
        powers = power_policy(gains, key, product)
        rates[key] = float(np.mean(subgroup_rate_instant(gains, powers)))
    return network_rate(net, allocation, rates)


BASELINES = ("rf_comac_fpc", "time_sharing", "rf_comac_apc", "improved_time_sharing")


def baseline_rate(variant: str, K1: int, P: float, model: FadingModel, mc: McConfig,
                  stats: ChannelStats | None = None) -> Estimate:
    """Relay-free reference rates for ``K1`` sources.

    ``rf_comac_fpc``: ``c_plus(1/K1 + E[min g] P)``.
    ``time_sharing``: ``log2(1 + E[g] P) / K1``.
    ``rf_comac_apc``: ``c_plus(1/K1 + E[min g] P / E[min g / g_self])``.
    ``improved_time_sharing``: ``E[log2(1 + g K1 P)] / K1``.
    """
    if K1 < 1:
        raise ValueError("K1 must be >= 1")
    if P < 0:
        raise ValueError("P must be >= 0")
    stats = stats or ChannelStats(model, mc)
    if variant == "rf_comac_fpc":
        return _jensen_rate(K1, P, stats.min_gain(K1))
    if variant == "time_sharing":
        value = capacity(model.average_gain * P) / K1
        return Estimate(value, 0.0, 0, value)
    if variant == "rf_comac_apc":
        m, q = stats.min_gain(K1), stats.ratio(K1)
        eps = apc_gain_factor(m.value, q.value, P)
        arg = 1.0 / K1 + eps
        dlog = 1.0 / (2 * math.log(2) * arg) if arg > 1 else 0.0
        # d eps / d m = P / q and d eps / d q = -eps / q
        se = dlog * math.hypot(P / q.value * m.std_error, eps / q.value * q.std_error)
        return Estimate(c_plus(arg), se, q.samples, None)
    if variant == "improved_time_sharing":
        est = stats.improved_ts(K1, P)
        analytic = None if est.analytic is None else est.analytic / K1
        return Estimate(est.value / K1, est.std_error / K1, est.samples, analytic)
    raise ValueError(f"unknown baseline {variant!r}")


def time_sharing_reduction(K1: int, P: float, model: FadingModel) -> float:
    """Fixed-power rate with every source its own subgroup and equal shares.

    ``c_plus(1 + E[g] P) / K1``. It uses the half-log rate of the subgroup
    formula and is therefore exactly half of the ``time_sharing`` baseline.
    """
    return (1.0 / K1) * c_plus(1.0 + model.average_gain * P)
