import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlfc.errors import BadShape, BadStrategy, CycleDetected, NotATree, PartitionViolation
from mlfc.functions import DataAssignment, FunctionSpec, eval_desired, run_aggregation
from mlfc.oracles import random_tree
from mlfc.topology import (DisorganizedNetwork, PartitionStrategy, build_hierarchical,
                           four_layer_example, layered_network, partition_group, reorganize,
                           relay_free_network)


def test_relay_free_shape():
    net = build_hierarchical([[1, 2, 3, 4], [5]], subgroups={(2, 5): [[1, 2, 3, 4]]})
    assert net.num_layers == 2
    assert net.sources == (1, 2, 3, 4)
    assert net.fusion_center == 5
    assert list(net.subgroup_keys()) == [(2, 5, 0)]


def test_four_layer_example_counts():
    net = four_layer_example()
    assert net.layer_sizes() == (10, 5, 2, 1)
    assert len(list(net.group_keys())) == 8
    assert len(list(net.subgroup_keys())) == 9
    assert net.subgroup((2, 11, 1)) == (3, 4, 5)
    assert net.path(4) == [11, 16, 18]


def test_shared_node_is_partition_violation():
    with pytest.raises(PartitionViolation) as err:
        build_hierarchical([[1, 2, 3, 4], [5, 6], [7]],
                           groups={(2, 5): [1, 2, 3], (2, 6): [3, 4], (3, 7): [5, 6]})
    assert err.value.where is not None


def test_subgroups_must_cover_group():
    with pytest.raises(PartitionViolation) as err:
        build_hierarchical([[1, 2, 3], [4]], groups={(2, 4): [1, 2, 3]},
                           subgroups={(2, 4): [[1], [2]]})
    assert err.value.where[:2] == (2, 4)


@pytest.mark.parametrize("layers", [[[1, 2]], [[1, 2], [3, 4]], [[1], [], [2]]])
def test_bad_shapes(layers):
    with pytest.raises((BadShape, PartitionViolation)):
        build_hierarchical(layers)


def test_partition_balanced_remainder_goes_first():
    assert partition_group([1, 2, 3, 4, 5], PartitionStrategy.balanced(2)) == [(1, 2, 3), (4, 5)]
    assert partition_group([1, 2, 3, 4, 5, 6, 7], PartitionStrategy.balanced(3)) == \
        [(1, 2, 3), (4, 5), (6, 7)]


def test_partition_single_and_singletons():
    assert partition_group([3, 1, 2], PartitionStrategy.single()) == [(3, 1, 2)]
    assert partition_group([3, 1], PartitionStrategy.singletons()) == [(3,), (1,)]


@pytest.mark.parametrize("count", [0, 4])
def test_balanced_out_of_range(count):
    with pytest.raises(BadStrategy):
        partition_group([1, 2, 3], PartitionStrategy.balanced(count) if count else
                        PartitionStrategy.parse("balanced:0"))


def test_explicit_partition_checked():
    with pytest.raises(BadStrategy):
        partition_group([1, 2, 3], PartitionStrategy.explicit([[1, 2], [2, 3]]))
    assert partition_group([1, 2, 3], PartitionStrategy.explicit([[2], [1, 3]])) == [(2,), (1, 3)]


@pytest.mark.parametrize("text", ["single", "singletons", "balanced:3"])
def test_strategy_parse_roundtrip(text):
    assert str(PartitionStrategy.parse(text)) == text


def test_reorganize_star():
    dnet = DisorganizedNetwork.from_edges([(1, 0), (2, 0), (3, 0), (4, 0)], 0)
    net = reorganize(dnet, PartitionStrategy.single())
    assert net.num_layers == 2
    assert net.groups[(2, 0)] == (1, 2, 3, 4)


def test_reorganize_chain_inserts_virtual_relay():
    # a=1 -> b=2 -> c=3 (fusion), d=4 -> c
    dnet = DisorganizedNetwork.from_edges([(1, 2), (2, 3), (4, 3)], 3)
    net = reorganize(dnet)
    assert net.num_layers == 3
    assert net.layer_of(1) == 1 and net.layer_of(4) == 1
    assert net.layer_of(2) == 2
    assert len(net.virtual) == 1
    relay = next(iter(net.virtual))
    assert relay == 5
    assert net.path(4) == [relay, 3]
    assert net.path(1) == [2, 3]
    # virtual relays carry no rate term
    assert all(k != relay for _, k in net.group_keys())
    assert any(k == relay for _, k in net.group_keys(include_virtual=True))


def test_reorganize_cycle():
    dnet = DisorganizedNetwork(nodes=[1, 2, 3], destination={1: 2, 2: 1}, fusion_center=3)
    with pytest.raises(CycleDetected):
        reorganize(dnet)


def test_reorganize_disconnected():
    dnet = DisorganizedNetwork(nodes=[1, 2, 3], destination={1: 3}, fusion_center=3)
    with pytest.raises(NotATree):
        reorganize(dnet)


def test_layered_network_groups():
    net = layered_network([10, 3, 1], PartitionStrategy.single())
    assert [len(net.groups[(2, k)]) for k in net.layers[1]] == [4, 3, 3]
    assert relay_free_network(5).layer_sizes() == (5, 1)


def test_layered_network_rejects_growth():
    with pytest.raises(BadShape):
        layered_network([2, 3, 1], PartitionStrategy.single())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reorganize_preserves_paths(seed):
    rng = np.random.default_rng(seed)
    edges, fc = random_tree(rng, max_depth=4, max_sources=20)
    dnet = DisorganizedNetwork.from_edges(edges, fc)
    net = reorganize(dnet, PartitionStrategy.balanced(1))
    real = set(dnet.nodes)
    for node in dnet.nodes:
        if node == fc:
            continue
        hier = [v for v in net.path(node) if v in real]
        assert hier == dnet.path(node)
        # every hop moves up exactly one layer
        layers = [net.layer_of(v) for v in [node] + net.path(node)]
        assert layers == list(range(layers[0], net.num_layers + 1))


def test_reorganized_tree_aggregates_exactly():
    rng = np.random.default_rng(3)
    edges, fc = random_tree(rng, max_depth=5, max_sources=30)
    net = reorganize(DisorganizedNetwork.from_edges(edges, fc), PartitionStrategy.balanced(1))
    data = DataAssignment({s: [int(v)] for s, v in zip(net.sources, rng.integers(0, 4, 99))})
    spec = FunctionSpec.type_function(3)
    assert np.array_equal(run_aggregation(net, spec, data, 1), eval_desired(spec, data, 1))
