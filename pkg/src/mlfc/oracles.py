"""Brute-force references for the closed-form solvers and channel statistics.

These are deliberately naive: a grid search for adaptive power, a linear
program for fixed power and a large Monte Carlo run for the ratio
statistic. They share no code with the solvers they check beyond the
objective itself.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

from .channel import FadingModel, McConfig, estimate, make_stream
from .rates import apc_term

ORACLE_SEED = 0x5EED_0F_0AC1E


def lp_fixed_power(rates):
    """Solve ``max t`` s.t. ``t <= p_c r_c``, ``sum p = 1``, ``p >= 0`` as an LP.

    Returns ``(t, p)``.
    """
    r = np.asarray(rates, dtype=float)
    n = len(r)
    # variables: p_1..p_n, t ; minimize -t
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    a_ub = np.zeros((n, n + 1))
    a_ub[np.arange(n), np.arange(n)] = -r
    a_ub[:, -1] = 1.0
    a_eq = np.ones((1, n + 1))
    a_eq[0, -1] = 0.0
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (n + 1), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.x[-1]), res.x[:-1]


def _simplex_grid(n, step):
    m = int(round(1.0 / step))
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        a = np.arange(m + 1) / m
        return np.column_stack([a, 1 - a])
    if n == 3:
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        keep = i + j <= m
        i, j = i[keep], j[keep]
        return np.column_stack([i / m, j / m, (m - i - j) / m])
    raise ValueError("grid oracle supports at most 3 subgroups")


def apc_grid_search(eps, sizes, step=1e-3):
    """Objective ``min_c g_c(p_c)`` on every point of a ``step`` grid of the simplex.

    Returns ``(best_value, best_point, all_values)``.
    """
    grid = _simplex_grid(len(eps), step)
    values = np.full(len(grid), np.inf)
    for c, (e, K) in enumerate(zip(eps, sizes)):
        values = np.minimum(values, apc_term(grid[:, c], K, e))
    i = int(np.argmax(values))
    return float(values[i]), grid[i], values


def pinned_ratio(K, samples=10_000_000, seed=ORACLE_SEED, model=None):
    """Large-sample E[min g / g_self] on a stream separate from the pipeline's."""
    model = model or FadingModel.rayleigh_unit()
    return estimate(model, K, McConfig(samples, seed),
                    lambda g: g.min(axis=1) / g[:, 0], "oracle_ratio")


def random_fixed_power_instance(rng, n_range=(2, 6), r_range=(0.1, 3.0)):
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    return rng.uniform(*r_range, size=n)


def random_apc_instance(rng, max_subgroups=3, eps_range=(0.05, 5.0), k_range=(1, 8)):
    n = int(rng.integers(2, max_subgroups + 1))
    eps = np.exp(rng.uniform(math.log(eps_range[0]), math.log(eps_range[1]), size=n))
    sizes = rng.integers(k_range[0], k_range[1] + 1, size=n)
    return [float(e) for e in eps], [int(k) for k in sizes]


def random_tree(rng, max_depth=5, max_sources=64):
    """Random in-tree as ``(edges, fusion_center)``, with at most ``max_sources`` leaves.

    Node 0 is the fusion center. Depth is at most ``max_depth``, so the
    layered network has at most ``max_depth + 1`` layers.
    """
    edges = []
    next_id = itertools.count(1)
    leaves = 0
    frontier = [(0, 0)]
    while frontier:
        node, depth = frontier.pop()
        # every pending internal node still needs at least one leaf below it
        budget = max_sources - leaves - len(frontier)
        n_children = int(rng.integers(1, min(5, budget) + 1))
        for _ in range(n_children):
            child = next(next_id)
            edges.append((child, node))
            if depth + 1 < max_depth and rng.random() < 0.45:
                frontier.append((child, depth + 1))
            else:
                leaves += 1
    return edges, 0


def oracle_stream(label):
    return make_stream(ORACLE_SEED, label)
