"""Desired, group and subgroup functions, and noiseless layer-by-layer aggregation.

Two families are supported:

* ``arithmetic_sum``: weighted sums of the source values. A weight may be a
  scalar or a vector (several weighted sums computed at once).
* ``type_function``: the histogram of source values over ``{0, ..., p}``.

Both divide by addition. A subgroup function is the partial weighted sum or
partial histogram of its members, and every reconstruction function is a
plain (vector) sum, so relay values compose exactly as the desired
function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import AlphabetViolation
from .topology import HierarchicalNetwork


@dataclass(frozen=True)
class FunctionSpec:
    family: str
    weights: Mapping[int, object] | None = None
    alphabet_max: int | None = None

    def __post_init__(self):
        if self.family == "arithmetic_sum":
            if self.weights is None:
                raise ValueError("arithmetic_sum needs per-source weights")
            for node, w in self.weights.items():
                if not np.all(np.isfinite(np.asarray(w, dtype=float))):
                    raise ValueError(f"weight of node {node} is not finite")
        elif self.family == "type_function":
            if self.alphabet_max is None or self.alphabet_max < 0:
                raise ValueError("type_function needs alphabet_max p >= 0")
        else:
            raise ValueError(f"unknown function family {self.family!r}")

    @classmethod
    def arithmetic_sum(cls, weights):
        return cls("arithmetic_sum", weights=MappingProxyType(dict(weights)))

    @classmethod
    def mean(cls, sources):
        sources = list(sources)
        return cls.arithmetic_sum({s: 1.0 / len(sources) for s in sources})

    @classmethod
    def type_function(cls, p):
        return cls("type_function", alphabet_max=int(p))

    @property
    def alphabet_size(self):
        return None if self.alphabet_max is None else self.alphabet_max + 1


@dataclass(frozen=True)
class DataAssignment:
    """``values[node][j - 1]`` is the j-th sample of a source node."""

    values: Mapping[int, tuple]

    def __init__(self, values: Mapping[int, Sequence]):
        frozen = {node: tuple(seq) for node, seq in values.items()}
        lengths = {len(seq) for seq in frozen.values()}
        if len(lengths) > 1:
            raise ValueError(f"sources hold different numbers of samples: {sorted(lengths)}")
        object.__setattr__(self, "values", MappingProxyType(frozen))

    @property
    def num_samples(self) -> int:
        return len(next(iter(self.values.values()))) if self.values else 0

    def sample(self, node, j):
        if not 1 <= j <= self.num_samples:
            raise IndexError(f"sample index {j} outside [1:{self.num_samples}]")
        return self.values[node][j - 1]


def _indicator(spec: FunctionSpec, value) -> np.ndarray:
    p = spec.alphabet_max
    if isinstance(value, (bool, np.bool_)) or not float(value).is_integer() or not 0 <= value <= p:
        raise AlphabetViolation(f"value {value!r} outside alphabet [0:{p}]")
    hist = np.zeros(p + 1, dtype=np.int64)
    hist[int(value)] = 1
    return hist


def _weighted(spec: FunctionSpec, node, value):
    w = spec.weights[node]
    if np.ndim(w) == 0:
        return float(w) * float(value)
    return np.asarray(w, dtype=float) * float(value)


def _add(values):
    values = list(values)
    if isinstance(values[0], np.ndarray):
        if values[0].dtype.kind == "i":
            return np.sum(values, axis=0)
        return np.array([math.fsum(col) for col in zip(*values)])
    return math.fsum(values)


def source_term(spec: FunctionSpec, node, value):
    """Contribution of one source value (weighted value or one-hot histogram)."""
    if spec.family == "type_function":
        return _indicator(spec, value)
    return _weighted(spec, node, value)


def eval_desired(spec: FunctionSpec, data: DataAssignment, j: int, sources=None):
    """Direct evaluation of the desired function over all sources for sample j."""
    sources = list(data.values) if sources is None else list(sources)
    return _add(source_term(spec, node, data.sample(node, j)) for node in sources)


def subgroup_function(spec: FunctionSpec, members, values, at_sources: bool):
    """Partial function of one subgroup.

    At the first hop members are sources and contribute their weighted value
    or one-hot histogram; further up, members are relays whose values are
    already partial results and are simply added.
    """
    if at_sources:
        return _add(source_term(spec, node, values[node]) for node in members)
    return _add(values[node] for node in members)


def group_function(parts):
    return _add(parts)


def run_aggregation(net: HierarchicalNetwork, spec: FunctionSpec, data: DataAssignment, j: int,
                    trace: dict | None = None):
    """Compute the desired function hop by hop and return the fusion-center value.

    Each node of layer ``l >= 2`` evaluates the subgroup functions of its
    group and reconstructs its group function from them; that value becomes
    the node's data for the next hop. Virtual relays own a single one-node
    subgroup, so they forward their child's value unchanged. If ``trace`` is
    given it receives ``{node: value}`` for every relay and the fusion center.
    """
    values = {node: data.sample(node, j) for node in net.sources}
    for l in range(2, net.num_layers + 1):
        at_sources = l == 2
        for k in net.layers[l - 1]:
            parts = [subgroup_function(spec, members, values, at_sources)
                     for members in net.subgroups[(l, k)]]
            values[k] = group_function(parts)
            if trace is not None:
                trace[k] = values[k]
    return values[net.fusion_center]
