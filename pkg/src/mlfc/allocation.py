"""Max-min time allocation under fixed and adaptive power control.

Both problems are posed over fused fractions ``p = alpha * beta`` (one per
subgroup, summing to one) and maximize the smallest weighted subgroup term.

Fixed power: the term is ``p * r`` with ``r`` the subgroup rate, so the
optimum equalizes all terms and ``t* = 1 / sum(1 / r)``.

Adaptive power: the term is ``g(p) = p * c_plus(1/K + eps/p)``. It is
concave in ``p``. For ``K = 1`` it increases toward ``eps / (2 ln 2)``. For
``K > 1`` it peaks at a finite ``p_peak`` and falls to zero at
``p_zero = eps / (1 - 1/K)``. The solver finds the largest level ``t`` for
which some ``p`` with ``g_c(p_c) >= t`` sums to one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, DomainError, NoSolution, ZeroGain, ZeroRateSubgroup
from .rates import Allocation, apc_gain_factor, apc_term, c_plus

LN2 = math.log(2.0)
_INV_E = math.exp(-1.0)
_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------

def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function (``w * exp(w) = x``, ``w >= -1``).

    Raises
    ------
    DomainError
        If ``x < -1/e``.
    """
    x = float(x)
    if math.isnan(x):
        raise DomainError("lambert_w0 of nan")
    if x < -_INV_E:
        if x < -_INV_E * (1 + 4 * _EPS):
            raise DomainError(f"lambert_w0 needs x >= -1/e, got {x!r}")
        return -1.0
    if abs(x + _INV_E) <= 4 * _EPS * _INV_E:
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf

    if x < -0.32:
        # series about the branch point in q = sqrt(2 (e x + 1))
        q = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q ** 3 - 43.0 / 540.0 * q ** 4
        if q < 1e-6:
            return w
    elif x <= 3.0:
        w = math.log1p(x)
        if x > 0.5:
            w *= 0.75
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1

    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if w_new < -1.0:
            w_new = (w - 1.0) / 2.0
        if abs(w_new - w) <= 4 * _EPS * max(1.0, abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


# ---------------------------------------------------------------------------
# Problem data and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubgroupParams:
    """Per-subgroup inputs: size ``K``, fixed-power rate ``r``, adaptive-power factor ``eps``."""

    key: tuple
    K: int
    r: float | None = None
    eps: float | None = None


@dataclass
class AllocationSolution:
    keys: list
    p: dict
    t: float
    method: str
    branch: str = "equalized"
    diagnostics: list = field(default_factory=list)
    kkt_residuals: dict = field(default_factory=dict)

    @property
    def p_vector(self) -> np.ndarray:
        return np.array([self.p[key] for key in self.keys])

    def allocation(self, net) -> Allocation:
        return Allocation.from_products(net, self.p)


def params_for_network(net, stats, P, fpc_mode="jensen_bound"):
    """:class:`SubgroupParams` for every (non-virtual) subgroup of ``net``."""
    from .rates import subgroup_rate_expected

    out = []
    for key in net.subgroup_keys():
        K = len(net.subgroup(key))
        r = subgroup_rate_expected(stats.model, K, P, fpc_mode, stats.mc, stats=stats).value
        eps = apc_gain_factor(stats.min_gain(K).value, stats.ratio(K).value, P)
        out.append(SubgroupParams(key, K, r, eps))
    return out


def _keys_and(params, attr):
    params = list(params)
    if not params:
        raise DegenerateInput("no subgroups")
    if all(isinstance(x, SubgroupParams) for x in params):
        return [x.key for x in params], [getattr(x, attr) for x in params], [x.K for x in params]
    return list(range(len(params))), [float(x) for x in params], [None] * len(params)


# ---------------------------------------------------------------------------
# Fixed power
# ---------------------------------------------------------------------------

def solve_fixed_power(params) -> AllocationSolution:
    """Optimal time allocation at fixed power: ``t* = 1 / sum(1/r)``, ``p* = t*/r``.

    ``params`` is a list of :class:`SubgroupParams` or of plain rates. A zero
    rate makes every allocation worth zero; the solution then has ``t = 0``,
    equal shares and a diagnostic naming the subgroup.
    """
    keys, rates, _ = _keys_and(params, "r")
    if any(r is None or r < 0 or not math.isfinite(r) for r in rates):
        raise DegenerateInput("fixed-power rates must be finite and >= 0")
    zero = [key for key, r in zip(keys, rates) if r == 0]
    if zero:
        msg = f"subgroups {zero} have zero rate; objective is 0 for every allocation"
        warnings.warn(msg, ZeroRateSubgroup, stacklevel=2)
        p = {key: 1.0 / len(keys) for key in keys}
        return AllocationSolution(keys, p, 0.0, "fixed_power", "zero", [msg])
    if len(rates) == 1:
        return AllocationSolution(keys, {keys[0]: 1.0}, rates[0], "fixed_power")
    t = 1.0 / math.fsum(1.0 / r for r in rates)
    p = {key: t / r for key, r in zip(keys, rates)}
    return AllocationSolution(keys, p, t, "fixed_power")


# ---------------------------------------------------------------------------
# Adaptive power
# ---------------------------------------------------------------------------

def apc_objective(p, eps, K) -> float:
    """``g(p) = p * c_plus(1/K + eps/p)`` for one subgroup."""
    return apc_term(p, K, eps)


def _apc_slope(p, eps, K):
    """dg/dp on the positive-rate region."""
    a = 1.0 / K + eps / p
    return (math.log(a) - (eps / p) / a) / (2 * LN2)


def apc_peak(eps, K):
    """``(p_peak, g_peak)``; for ``K = 1`` the supremum ``(inf, eps / (2 ln 2))``."""
    if K == 1:
        return math.inf, eps / (2 * LN2)
    tau = lambert_w0(-_INV_E / K)
    a = -1.0 / (K * tau)
    p = eps / (a - 1.0 / K)
    return p, apc_objective(p, eps, K)


def apc_zero(eps, K):
    """Smallest ``p`` beyond which the rate is zero (``inf`` for ``K = 1``)."""
    if K == 1:
        return math.inf
    return eps / (1.0 - 1.0 / K)


def _solve_monotone(fn, target, lo, hi, slope, increasing):
    """Safeguarded Newton for ``fn(p) = target`` on a bracket where fn is monotone."""
    p = 0.5 * (lo + hi)
    for _ in range(200):
        val = fn(p) - target
        if abs(val) <= 1e-14 * max(1.0, abs(target)):
            return p
        if (val < 0) == increasing:
            lo = p
        else:
            hi = p
        d = slope(p)
        cand = p - val / d if d != 0 else math.nan
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if hi - lo <= 4 * _EPS * hi:
            return cand
        p = cand
    return p


def solve_tight_p(eps, K, t) -> float:
    """Smallest ``p > 0`` with ``p * c_plus(1/K + eps/p) = t``.

    ``g`` is strictly increasing on ``(0, p_peak]``, which is where this
    root lies. ``t = 0`` returns ``0``.

    Raises
    ------
    NoSolution
        When ``t`` exceeds the largest attainable term.
    """
    if eps <= 0:
        raise DegenerateInput("eps must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    p_peak, g_peak = apc_peak(eps, K)
    if K == 1:
        if t >= g_peak:
            raise NoSolution(f"t={t!r} is not below the supremum {g_peak!r}", (0.0, math.inf))
        hi = max(eps, 1.0)
        while apc_objective(hi, eps, K) < t:
            hi *= 2.0
            if hi > 1e300:
                raise NoSolution("no bracket found", (0.0, hi))
    else:
        if t > g_peak * (1 + 1e-15):
            raise NoSolution(f"t={t!r} exceeds the peak {g_peak!r}", (0.0, p_peak))
        if t >= g_peak:
            return p_peak
        hi = p_peak
    return _solve_monotone(lambda p: apc_objective(p, eps, K), t, 0.0, hi,
                           lambda p: _apc_slope(p, eps, K), increasing=True)


def solve_tight_p_upper(eps, K, t) -> float:
    """Largest ``p`` with ``g(p) = t`` (the falling side, ``p >= p_peak``); ``inf`` for K = 1."""
    if K == 1:
        return math.inf
    p_peak, g_peak = apc_peak(eps, K)
    if t > g_peak * (1 + 1e-15):
        raise NoSolution(f"t={t!r} exceeds the peak {g_peak!r}", (p_peak, apc_zero(eps, K)))
    if t >= g_peak:
        return p_peak
    p_zero = apc_zero(eps, K)
    if t == 0:
        return p_zero
    return _solve_monotone(lambda p: apc_objective(p, eps, K), t, p_peak, p_zero,
                           lambda p: _apc_slope(p, eps, K), increasing=False)


def _bisect_level(fn, lo, hi, increasing):
    """Level ``t`` in ``[lo, hi]`` with ``fn(t) = 1`` for a monotone ``fn``."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 2 * _EPS * hi:
            break
        if (fn(mid) < 1.0) == increasing:
            lo = mid
        else:
            hi = mid
    return lo, hi


def solve_apc(params) -> AllocationSolution:
    """Optimal time allocation under adaptive power control.

    With ``S_lo(t)`` / ``S_hi(t)`` the sums of the smallest / largest ``p``
    reaching level ``t`` in each subgroup, ``t`` is attainable exactly when
    ``S_lo(t) <= 1 <= S_hi(t)``. Three cases result:

    * ``increasing``: every term is tight on its rising side and
      ``sum p = 1``;
    * ``peak``: the weakest subgroup sits at its peak, spare time cannot
      raise the minimum and is spread over the other subgroups without
      pushing them below ``t``;
    * ``decreasing``: the simplex forces every subgroup past its peak and
      all terms are tight on the falling side.
    """
    keys, eps, sizes = _keys_and(params, "eps")
    if any(K is None for K in sizes):
        raise DegenerateInput("adaptive power needs SubgroupParams with sizes")
    if any(e is None or not e > 0 or not math.isfinite(e) for e in eps):
        raise DegenerateInput("every eps must be finite and > 0")
    n = len(keys)
    if n == 1:
        t = apc_objective(1.0, eps[0], sizes[0])
        branch = "increasing" if apc_peak(eps[0], sizes[0])[0] >= 1.0 else "decreasing"
        return AllocationSolution(keys, {keys[0]: 1.0}, t, "apc", branch,
                                  [] if t > 0 else [f"subgroup {keys[0]} has zero rate"])

    peaks = [apc_peak(e, K) for e, K in zip(eps, sizes)]
    ceiling = min(g for _, g in peaks)

    def lows(t):
        return [solve_tight_p(e, K, t) for e, K in zip(eps, sizes)]

    def highs(t):
        return [solve_tight_p_upper(e, K, t) for e, K in zip(eps, sizes)]

    zero_sum = math.fsum(apc_zero(e, K) for e, K in zip(eps, sizes))
    if zero_sum < 1.0:
        msg = "every allocation pushes some subgroup past its zero-rate point"
        warnings.warn(msg, ZeroRateSubgroup, stacklevel=2)
        zeros = [apc_zero(e, K) for e, K in zip(eps, sizes)]
        p = {key: z / zero_sum for key, z in zip(keys, zeros)}
        return AllocationSolution(keys, p, 0.0, "apc", "zero", [msg])

    # K = 1 terms never reach their supremum, so the top level is open there
    top = ceiling
    if math.isinf(peaks[int(np.argmin([g for _, g in peaks]))][0]):
        top = ceiling * (1 - 1e-15)
    s_lo_top = math.fsum(lows(top))
    if s_lo_top >= 1.0:
        lo, hi = _bisect_level(lambda t: math.fsum(lows(t)), 0.0, top, increasing=True)
        t = lo
        p_list = lows(t)
        branch = "increasing"
    else:
        s_hi_top = math.fsum(highs(top))
        if s_hi_top >= 1.0:
            t = top
            p_list = lows(t)
            room = [h - l for h, l in zip(highs(t), p_list)]
            spare = 1.0 - math.fsum(p_list)
            unbounded = [i for i, r in enumerate(room) if math.isinf(r)]
            if unbounded:
                for i in unbounded:
                    p_list[i] += spare / len(unbounded)
            else:
                total = math.fsum(room)
                p_list = [l + spare * r / total for l, r in zip(p_list, room)]
            branch = "peak"
        else:
            lo, hi = _bisect_level(lambda t: math.fsum(highs(t)), 0.0, top, increasing=False)
            t = lo
            p_list = highs(t)
            branch = "decreasing"

    total = math.fsum(p_list)
    p_list = [x / total for x in p_list]
    p = dict(zip(keys, p_list))
    t = min(apc_objective(x, e, K) for x, e, K in zip(p_list, eps, sizes))
    diagnostics = [] if t > 0 else ["optimal level is zero"]
    return AllocationSolution(keys, p, t, "apc", branch, diagnostics)


def kkt_check(solution: AllocationSolution, params, tol=1e-8) -> dict:
    """Residuals of the optimality conditions of the adaptive-power problem.

    For each subgroup with positive rate, the multiplier ratio
    ``nu = mu / lambda`` is read off the stationarity condition
    ``ln(1/K + eps/p) - (eps/p) / (1/K + eps/p) = nu ln 2``, and ``p`` is
    rebuilt in closed form as ``max(0, -eps K / (1 + 1/tau))`` with
    ``tau = W0(-2^-nu / (K e))``. Reported (all should be ~0):

    ``simplex``      ``|sum p - 1|``
    ``objective``    ``|t - min_c g_c(p_c)|``
    ``tightness``    largest gap ``|g_c - t|`` among subgroups that must be tight
    ``closed_form``  largest relative gap between ``p`` and its rebuilt value
    ``multipliers``  violation of ``lambda >= 0`` (mixed-sign ``nu``), or of
                     ``nu = 0`` on the binding subgroup when some subgroup has slack
    """
    keys = solution.keys
    by_key = {x.key: x for x in params}
    p = np.array([solution.p[k] for k in keys])
    eps = [by_key[k].eps for k in keys]
    sizes = [by_key[k].K for k in keys]
    g = np.array([apc_objective(x, e, K) for x, e, K in zip(p, eps, sizes)])
    t = solution.t

    res = {
        "simplex": abs(math.fsum(p) - 1.0),
        "nonnegative": max(0.0, -float(p.min())),
        "objective": abs(t - float(g.min())),
    }
    scale = max(1.0, abs(t))
    active = [i for i in range(len(keys)) if g[i] - t <= tol * scale]
    slack = [i for i in range(len(keys)) if i not in active and p[i] > 0]

    nus, closed = {}, 0.0
    for i, (x, e, K) in enumerate(zip(p, eps, sizes)):
        if x <= 0 or 1.0 / K + e / x <= 1.0:
            continue
        a = 1.0 / K + e / x
        nu = (math.log(a) - (e / x) / a) / LN2
        nus[i] = nu
        arg = -(2.0 ** -nu) / K * _INV_E
        tau = lambert_w0(arg)
        rebuilt = max(0.0, -e * K / (1.0 + 1.0 / tau))
        closed = max(closed, abs(rebuilt - x) / max(1.0, abs(x)))
    res["closed_form"] = closed

    if slack:
        res["tightness"] = 0.0
        res["multipliers"] = min((abs(nus[i]) for i in active if i in nus), default=math.inf)
    else:
        res["tightness"] = float(np.max(np.abs(g - t))) if len(g) else 0.0
        active_nu = [nus[i] for i in active if i in nus]
        pos = max([v for v in active_nu if v > 0], default=0.0)
        neg = -min([v for v in active_nu if v < 0], default=0.0)
        res["multipliers"] = min(pos, neg)
    res["max"] = max(res.values())
    solution.kkt_residuals = res
    return res


# ---------------------------------------------------------------------------
# Power policy
# ---------------------------------------------------------------------------

@dataclass
class PowerPolicy:
    """Per-use, per-node transmit powers of one subgroup over its active uses."""

    powers: np.ndarray
    c: float
    budget: float
    fraction: float

    def long_term_average(self):
        """Per-node average over all channel uses (idle uses count as zero power)."""
        return self.fraction * self.powers.mean(axis=0)

    def long_term_std_error(self):
        m = self.powers.shape[0]
        if m < 2:
            return np.zeros(self.powers.shape[1])
        return self.fraction * self.powers.std(axis=0, ddof=1) / math.sqrt(m)


def apc_power_policy(gains, p, ratio_mean, P) -> PowerPolicy:
    """Channel-inverting powers ``c * min_j g_j / g_i`` with ``c = P / (p E[min g / g_self])``.

    ``gains`` is a ``(uses, K)`` array over the subgroup's own channel uses;
    on all other uses the nodes are silent.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 2 or gains.shape[1] < 1:
        raise ValueError("gains must be a (uses, K) array")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if np.any(gains <= 0):
        raise ZeroGain("zero gain on an active channel use")
    c = P / (p * ratio_mean)
    powers = c * gains.min(axis=1, keepdims=True) / gains
    return PowerPolicy(powers, c, float(P), float(p))


def apc_policy_for(stats, P):
    """Power policy callable for :func:`mlfc.rates.network_rate_empirical`."""
    def policy(gains, key, product):
        ratio = stats.ratio(gains.shape[1]).value
        return apc_power_policy(gains, product, ratio, P).powers
    return policy
