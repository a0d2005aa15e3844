"""Disorganized and hierarchical network topologies.

A hierarchical network has layers ``1..L``. Layer 1 holds the sources and
layer ``L`` holds only the fusion center. Every node ``k`` of layer ``l >= 2``
owns a group (a subset of layer ``l-1``), and each group is split into
ordered subgroups. Node identifiers are opaque integers. Layer indices are
1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import BadShape, BadStrategy, CycleDetected, NotATree, PartitionViolation

GroupKey = tuple[int, int]
SubgroupKey = tuple[int, int, int]


@dataclass(frozen=True)
class PartitionStrategy:
    """How a group is split into subgroups.

    ``kind`` is one of ``single``, ``singletons``, ``balanced`` (with
    ``count``) or ``explicit`` (with ``parts``).
    """

    kind: str = "single"
    count: int | None = None
    parts: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("single", "singletons", "balanced", "explicit"):
            raise BadStrategy(f"unknown partition strategy {self.kind!r}")
        if self.kind == "balanced" and (self.count is None or self.count < 1):
            raise BadStrategy("balanced strategy needs a subgroup count >= 1")
        if self.kind == "explicit" and self.parts is None:
            raise BadStrategy("explicit strategy needs a list of parts")

    @classmethod
    def single(cls):
        return cls("single")

    @classmethod
    def singletons(cls):
        return cls("singletons")

    @classmethod
    def balanced(cls, count):
        return cls("balanced", count=int(count))

    @classmethod
    def explicit(cls, parts):
        return cls("explicit", parts=tuple(tuple(p) for p in parts))

    @classmethod
    def parse(cls, text):
        """Parse ``single``, ``singletons``/``all`` or ``balanced:C``."""
        text = str(text).strip().lower()
        if text == "single":
            return cls.single()
        if text in ("singletons", "all"):
            return cls.singletons()
        if text.startswith("balanced:"):
            try:
                return cls.balanced(int(text.split(":", 1)[1]))
            except ValueError:
                pass
        raise BadStrategy(f"cannot parse partition strategy {text!r}")

    def __str__(self):
        if self.kind == "balanced":
            return f"balanced:{self.count}"
        return self.kind


def partition_group(group: Sequence[int], strategy: PartitionStrategy) -> list[tuple[int, ...]]:
    """Split ``group`` into subgroups according to ``strategy``.

    The result is deterministic given the order of ``group``. For
    ``balanced(C)`` the remainder nodes go to the earliest subgroups, so
    ``[1, 2, 3, 4, 5]`` with ``balanced(2)`` gives ``[(1, 2, 3), (4, 5)]``.
    """
    group = tuple(group)
    if not group:
        raise BadStrategy("cannot partition an empty group")
    if len(set(group)) != len(group):
        raise BadStrategy("group contains duplicate nodes")
    if strategy.kind == "single":
        return [group]
    if strategy.kind == "singletons":
        return [(node,) for node in group]
    if strategy.kind == "balanced":
        count = strategy.count
        if not 1 <= count <= len(group):
            raise BadStrategy(f"balanced({count}) needs 1 <= C <= {len(group)}")
        base, extra = divmod(len(group), count)
        parts, start = [], 0
        for c in range(count):
            size = base + (1 if c < extra else 0)
            parts.append(group[start:start + size])
            start += size
        return parts
    parts = [tuple(p) for p in strategy.parts]
    members = [node for part in parts for node in part]
    if any(not part for part in parts):
        raise BadStrategy("explicit partition has an empty part")
    if len(members) != len(set(members)) or set(members) != set(group):
        raise BadStrategy("explicit parts do not partition the group")
    return parts


@dataclass(frozen=True)
class DisorganizedNetwork:
    """Arbitrary in-tree: every node except the fusion center has one destination."""

    nodes: tuple[int, ...]
    destination: Mapping[int, int]
    fusion_center: int

    def __init__(self, nodes: Iterable[int], destination: Mapping[int, int], fusion_center: int):
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "destination", MappingProxyType(dict(destination)))
        object.__setattr__(self, "fusion_center", fusion_center)

    @classmethod
    def from_edges(cls, edges, fusion_center, nodes=None):
        """Build from ``(node, destination)`` pairs; node order follows first appearance."""
        destination = {}
        order = [] if nodes is None else list(nodes)
        seen = set(order)
        for src, dst in edges:
            if src in destination:
                raise NotATree(f"node {src} has more than one destination")
            destination[src] = dst
            for node in (src, dst):
                if node not in seen:
                    seen.add(node)
                    order.append(node)
        if fusion_center not in seen:
            order.append(fusion_center)
        return cls(order, destination, fusion_center)

    def validate(self):
        nodes = set(self.nodes)
        if len(nodes) != len(self.nodes):
            raise NotATree("duplicate node identifiers")
        if self.fusion_center not in nodes:
            raise NotATree("fusion center is not a node")
        if self.fusion_center in self.destination:
            raise NotATree("fusion center must not have a destination")
        for node in self.nodes:
            if node == self.fusion_center:
                continue
            if node not in self.destination:
                raise NotATree(f"node {node} has no destination")
            if self.destination[node] not in nodes:
                raise NotATree(f"node {node} points at unknown node {self.destination[node]}")
        extra = set(self.destination) - nodes
        if extra:
            raise NotATree(f"destinations given for unknown nodes {sorted(extra)}")
        # any node that never reaches the fusion center sits on or feeds a cycle
        reached = {self.fusion_center}
        for node in self.nodes:
            path = []
            cur = node
            while cur not in reached:
                if cur in path:
                    raise CycleDetected(f"cycle through node {cur}")
                path.append(cur)
                cur = self.destination[cur]
            reached.update(path)

    def children(self) -> dict[int, list[int]]:
        kids = {node: [] for node in self.nodes}
        for node in self.nodes:
            if node != self.fusion_center:
                kids[self.destination[node]].append(node)
        return kids

    def depth(self) -> dict[int, int]:
        kids = self.children()
        depth = {self.fusion_center: 0}
        frontier = [self.fusion_center]
        while frontier:
            nxt = []
            for node in frontier:
                for child in kids[node]:
                    depth[child] = depth[node] + 1
                    nxt.append(child)
            frontier = nxt
        return depth

    def path(self, node) -> list[int]:
        """Nodes visited from ``node`` (exclusive) to the fusion center (inclusive)."""
        out = []
        while node != self.fusion_center:
            node = self.destination[node]
            out.append(node)
        return out


@dataclass(frozen=True, eq=False)
class HierarchicalNetwork:
    """Validated layered network. Build it with :func:`build_hierarchical`."""

    layers: tuple[tuple[int, ...], ...]
    groups: Mapping[GroupKey, tuple[int, ...]]
    subgroups: Mapping[GroupKey, tuple[tuple[int, ...], ...]]
    virtual: frozenset = field(default_factory=frozenset)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def sources(self) -> tuple[int, ...]:
        return self.layers[0]

    @property
    def fusion_center(self) -> int:
        return self.layers[-1][0]

    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.layers)

    def layer_of(self, node) -> int:
        for l, layer in enumerate(self.layers, start=1):
            if node in layer:
                return l
        raise KeyError(node)

    def address(self, node) -> tuple[int, int]:
        """``(l, k)`` position of ``node``, with ``k`` 1-based within its layer."""
        l = self.layer_of(node)
        return l, self.layers[l - 1].index(node) + 1

    def parent(self, node):
        l = self.layer_of(node)
        if l == self.num_layers:
            return None
        for k in self.layers[l]:
            if node in self.groups[(l + 1, k)]:
                return k
        raise AssertionError("validated network without a parent")  # pragma: no cover

    def path(self, node) -> list[int]:
        out = []
        node = self.parent(node)
        while node is not None:
            out.append(node)
            node = self.parent(node)
        return out

    def group_keys(self, include_virtual=False) -> Iterator[GroupKey]:
        for l in range(2, self.num_layers + 1):
            for k in self.layers[l - 1]:
                if include_virtual or k not in self.virtual:
                    yield (l, k)

    def subgroup_keys(self, include_virtual=False) -> Iterator[SubgroupKey]:
        for l, k in self.group_keys(include_virtual):
            for c in range(len(self.subgroups[(l, k)])):
                yield (l, k, c)

    def subgroup(self, key: SubgroupKey) -> tuple[int, ...]:
        l, k, c = key
        return self.subgroups[(l, k)][c]

    def num_subgroups(self, l, k) -> int:
        return len(self.subgroups[(l, k)])

    def subgroup_sizes(self, include_virtual=False) -> dict[SubgroupKey, int]:
        return {key: len(self.subgroup(key)) for key in self.subgroup_keys(include_virtual)}

    def __repr__(self):
        return (f"HierarchicalNetwork(L={self.num_layers}, sizes={self.layer_sizes()}, "
                f"virtual={len(self.virtual)})")


def build_hierarchical(layers, groups=None, subgroups=None, virtual=()) -> HierarchicalNetwork:
    """Validate raw membership data and return a :class:`HierarchicalNetwork`.

    Parameters
    ----------
    layers : sequence of sequences of int
        ``layers[0]`` are the sources, ``layers[-1]`` must hold one node.
    groups : mapping ``(l, k) -> nodes``, optional
        Group of node ``k`` in layer ``l``. Derived from ``subgroups`` when
        omitted.
    subgroups : mapping ``(l, k) -> list of node lists``, optional
        Defaults to one subgroup per group.
    virtual : iterable of int
        Pass-through relays; each must own a single one-node subgroup.
    """
    layers = tuple(tuple(layer) for layer in layers)
    if len(layers) < 2:
        raise BadShape(f"need at least 2 layers, got {len(layers)}")
    for l, layer in enumerate(layers, start=1):
        if not layer:
            raise BadShape(f"layer {l} is empty")
    if len(layers[-1]) != 1:
        raise BadShape(f"last layer must hold exactly one node, got {len(layers[-1])}")
    every = [node for layer in layers for node in layer]
    if len(every) != len(set(every)):
        raise BadShape("a node appears more than once across layers")
    if groups is None and subgroups is None:
        raise BadShape("need groups or subgroups")

    expected = {(l, k) for l in range(2, len(layers) + 1) for k in layers[l - 1]}
    if groups is None:
        groups = {key: [node for part in parts for node in part] for key, parts in subgroups.items()}
    groups = {tuple(key): tuple(members) for key, members in groups.items()}
    if subgroups is None:
        subgroups = {key: (members,) for key, members in groups.items()}
    subgroups = {tuple(key): tuple(tuple(p) for p in parts) for key, parts in subgroups.items()}

    for key in sorted(set(groups) - expected):
        raise PartitionViolation(f"group {key} does not belong to a layer >= 2 node", key)
    for key in sorted(set(subgroups) - expected):
        raise PartitionViolation(f"subgroups {key} do not belong to a layer >= 2 node", key)

    for l in range(2, len(layers) + 1):
        below = set(layers[l - 2])
        owner = {}
        for k in layers[l - 1]:
            members = groups.get((l, k), ())
            if not members:
                raise PartitionViolation(f"node {k} in layer {l} has an empty group", (l, k))
            for node in members:
                if node not in below:
                    raise PartitionViolation(
                        f"group ({l},{k}) holds node {node} outside layer {l - 1}", (l, k))
                if node in owner:
                    raise PartitionViolation(
                        f"node {node} is in groups ({l},{owner[node]}) and ({l},{k})", (l, k))
                owner[node] = k
        missing = below - set(owner)
        if missing:
            raise PartitionViolation(
                f"layer {l - 1} nodes {sorted(missing)} belong to no group", (l, None))

        for k in layers[l - 1]:
            parts = subgroups.get((l, k))
            if not parts:
                raise PartitionViolation(f"group ({l},{k}) has no subgroups", (l, k))
            seen = set()
            for c, part in enumerate(parts):
                if not part:
                    raise PartitionViolation(f"subgroup ({l},{k},{c}) is empty", (l, k, c))
                for node in part:
                    if node in seen:
                        raise PartitionViolation(
                            f"node {node} is in two subgroups of ({l},{k})", (l, k, c))
                    if node not in groups[(l, k)]:
                        raise PartitionViolation(
                            f"subgroup ({l},{k},{c}) holds {node} outside its group", (l, k, c))
                    seen.add(node)
            if seen != set(groups[(l, k)]):
                raise PartitionViolation(f"subgroups of ({l},{k}) do not cover the group", (l, k))

    virtual = frozenset(virtual)
    inner = set(every) - set(layers[0]) - set(layers[-1])
    for node in virtual:
        if node not in inner:
            raise BadShape(f"virtual relay {node} must sit strictly between first and last layer")
    for l in range(2, len(layers)):
        for k in layers[l - 1]:
            if k in virtual and len(groups[(l, k)]) != 1:
                raise BadShape(f"virtual relay {k} must own exactly one node")

    return HierarchicalNetwork(
        layers=layers,
        groups=MappingProxyType(groups),
        subgroups=MappingProxyType(subgroups),
        virtual=virtual,
    )


def reorganize(dnet: DisorganizedNetwork, strategy: PartitionStrategy | None = None) -> HierarchicalNetwork:
    """Recast an arbitrary in-tree as a hierarchical network.

    Leaves become sources in layer 1, an internal node at hop distance ``d``
    from the fusion center goes to layer ``L - d`` where ``L`` is the maximum
    depth plus one. An edge that skips layers is bridged by a chain of
    virtual pass-through relays, so every transmission moves between adjacent
    layers and each original node keeps its destination. Virtual relay ids
    continue upward from the largest real id.
    """
    strategy = strategy or PartitionStrategy.single()
    dnet.validate()
    kids = dnet.children()
    depth = dnet.depth()
    max_depth = max(depth.values())
    if max_depth < 1:
        raise NotATree("network holds only the fusion center")
    num_layers = max_depth + 1
    layer = {}
    for node in dnet.nodes:
        layer[node] = 1 if not kids[node] else num_layers - depth[node]

    next_id = max(dnet.nodes) + 1
    virtual = []
    targets = {dnet.fusion_center: kids[dnet.fusion_center]}
    layers = [[dnet.fusion_center]]
    groups = {}
    for l in range(num_layers, 1, -1):
        below = []
        for node in layers[0]:
            members = []
            for target in targets[node]:
                if layer[target] == l - 1:
                    child = target
                    targets[child] = kids[target]
                else:
                    child = next_id
                    next_id += 1
                    virtual.append(child)
                    layer[child] = l - 1
                    targets[child] = [target]
                members.append(child)
            groups[(l, node)] = members
            below.extend(members)
        layers.insert(0, below)

    subgroups = {}
    for key, members in groups.items():
        if key[1] in virtual:
            subgroups[key] = [members]
        else:
            subgroups[key] = partition_group(members, strategy)
    return build_hierarchical(layers, groups, subgroups, virtual)


def layered_network(layer_sizes: Sequence[int], strategies) -> HierarchicalNetwork:
    """Regular network with contiguous near-equal groups.

    Node ids run ``1..N`` from the first layer upward. Layer ``l-1`` is cut
    into ``K_l`` contiguous groups with sizes differing by at most one (larger
    groups first). ``strategies`` is one :class:`PartitionStrategy` for all
    groups or a sequence with one entry per layer ``2..L``.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or sizes[-1] != 1 or min(sizes) < 1:
        raise BadShape(f"bad layer sizes {sizes}")
    for l in range(1, len(sizes)):
        if sizes[l] > sizes[l - 1]:
            raise BadShape(f"layer {l + 1} has more nodes than layer {l}")
    if isinstance(strategies, PartitionStrategy):
        strategies = [strategies] * (len(sizes) - 1)
    strategies = list(strategies)
    if len(strategies) != len(sizes) - 1:
        raise BadShape("need one partition strategy per layer 2..L")

    layers, start = [], 1
    for size in sizes:
        layers.append(list(range(start, start + size)))
        start += size
    groups, subgroups = {}, {}
    for l in range(2, len(sizes) + 1):
        cut = partition_group(layers[l - 2], PartitionStrategy.balanced(sizes[l - 1]))
        for k, members in zip(layers[l - 1], cut):
            groups[(l, k)] = members
            subgroups[(l, k)] = partition_group(members, strategies[l - 2])
    return build_hierarchical(layers, groups, subgroups)


def relay_free_network(num_sources, strategy=None) -> HierarchicalNetwork:
    """Two-layer network: all sources in one group at the fusion center."""
    return layered_network([num_sources, 1], strategy or PartitionStrategy.single())


def four_layer_example() -> HierarchicalNetwork:
    """Ten sources, five relays, two relays, fusion center.

    The first relay group ``{1..5}`` is split into subgroups ``{1,2}`` and
    ``{3,4,5}``; every other group is one subgroup. 8 groups, 9 subgroups.
    """
    layers = [list(range(1, 11)), [11, 12, 13, 14, 15], [16, 17], [18]]
    subgroups = {
        (2, 11): [[1, 2], [3, 4, 5]],
        (2, 12): [[6, 7]],
        (2, 13): [[8]],
        (2, 14): [[9]],
        (2, 15): [[10]],
        (3, 16): [[11, 12, 13]],
        (3, 17): [[14, 15]],
        (4, 18): [[16, 17]],
    }
    return build_hierarchical(layers, subgroups=subgroups)
