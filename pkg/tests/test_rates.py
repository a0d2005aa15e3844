import math

import numpy as np
import pytest

from mlfc.allocation import apc_policy_for
from mlfc.channel import FadingModel, McConfig
from mlfc.errors import EmptySubgroup, ShapeMismatch, SimplexViolation
from mlfc.rates import (Allocation, ChannelStats, baseline_rate, c_plus, capacity,
                        expected_log_capacity_exponential, group_rate, network_rate,
                        network_rate_empirical, subgroup_rate_expected, subgroup_rate_instant,
                        time_sharing_reduction)
from mlfc.topology import PartitionStrategy, four_layer_example, relay_free_network

UNIT = FadingModel.rayleigh_unit()
MC = McConfig(50_000, 11)


def test_c_plus_clips():
    assert c_plus(0.5) == 0.0
    assert c_plus(1.0) == 0.0
    assert c_plus(4.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        c_plus(-1.0)


def test_instant_rate():
    # 1/2 + min(1*3, 2*2) = 3.5
    assert subgroup_rate_instant([1.0, 2.0], [3.0, 2.0]) == pytest.approx(0.5 * math.log2(3.5))
    with pytest.raises(EmptySubgroup):
        subgroup_rate_instant(np.zeros((3, 0)), 1.0)


def test_jensen_upper_bounds_exact_for_single_node():
    # with K = 1 the argument never drops below 1, where c_plus is concave
    for K in (1,):
        for P in (1.0, 10.0, 100.0):
            j = subgroup_rate_expected(UNIT, K, P, "jensen_bound", MC).value
            e = subgroup_rate_expected(UNIT, K, P, "exact_expectation", MC)
            assert e.value <= j + 3 * e.std_error


def test_subgroup_rate_constant_model():
    model = FadingModel.constant(0.5)
    r = subgroup_rate_expected(model, 4, 10.0, "exact_expectation", MC)
    assert r.value == pytest.approx(c_plus(0.25 + 5.0))
    assert r.std_error == 0.0


def test_group_rate_checks_simplex():
    assert group_rate([1.0, 2.0], [0.5, 0.5]) == 0.5
    with pytest.raises(SimplexViolation):
        group_rate([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(ShapeMismatch):
        group_rate([1.0], [0.5, 0.5])


def test_network_rate_bottleneck_and_tie_break():
    net = four_layer_example()
    alloc = Allocation.uniform(net)
    rates = {key: 1.0 for key in net.subgroup_keys()}
    report = network_rate(net, alloc, rates)
    # group (2,11) has two subgroups, so its halves lose first; ties keep the first
    assert report.bottleneck == (2, 11, 0)
    assert report.rate == pytest.approx(1 / 8 / 2)
    assert report.bottleneck_label() == "2:11:0"
    rates[(3, 17, 0)] = 0.1
    assert network_rate(net, alloc, rates).bottleneck == (3, 17, 0)


def test_allocation_shape_checks():
    net = four_layer_example()
    alloc = Allocation.uniform(net)
    with pytest.raises(ShapeMismatch):
        network_rate(net, alloc, {})
    bad = Allocation({(2, 1): 1.0}, {(2, 1, 0): 1.0})
    with pytest.raises(ShapeMismatch):
        bad.validate(net)
    with pytest.raises(SimplexViolation):
        Allocation({(2, 1): 0.7}, {(2, 1, 0): 1.0}).validate()


def test_from_products_roundtrip():
    net = four_layer_example()
    alloc = Allocation.uniform(net)
    back = Allocation.from_products(net, alloc.products())
    for key in net.subgroup_keys():
        assert back.product(key) == pytest.approx(alloc.product(key), rel=1e-15)
        assert back.beta[key] == pytest.approx(alloc.beta[key], rel=1e-15)


def test_empirical_rate_converges_to_exact_expectation():
    net = relay_free_network(4)
    alloc = Allocation.uniform(net)
    emp = network_rate_empirical(net, alloc, UNIT, 200_000, seed=3, P=100.0)
    exact = subgroup_rate_expected(UNIT, 4, 100.0, "exact_expectation", McConfig(200_000, 4))
    assert emp.rate == pytest.approx(exact.value, abs=5 * exact.std_error)


def test_empirical_apc_beats_fixed_power():
    net = relay_free_network(8)
    alloc = Allocation.uniform(net)
    stats = ChannelStats(UNIT, MC)
    fpc = network_rate_empirical(net, alloc, UNIT, 100_000, seed=1, P=10.0)
    apc = network_rate_empirical(net, alloc, UNIT, 100_000, seed=1,
                                 power_policy=apc_policy_for(stats, 10.0))
    assert apc.rate > fpc.rate


def test_baselines_values():
    P = 10.0
    assert baseline_rate("time_sharing", 4, P, UNIT, MC).value == pytest.approx(math.log2(11) / 4)
    fpc = baseline_rate("rf_comac_fpc", 4, P, UNIT, MC).value
    assert fpc == pytest.approx(c_plus(0.25 + 0.25 * P))
    its = baseline_rate("improved_time_sharing", 4, P, UNIT, McConfig(400_000, 1))
    assert its.analytic == pytest.approx(expected_log_capacity_exponential(4 * P) / 4)
    assert abs(its.value - its.analytic) < 4 * its.std_error
    apc = baseline_rate("rf_comac_apc", 4, P, UNIT, MC)
    assert apc.value > fpc
    with pytest.raises(ValueError):
        baseline_rate("nope", 4, P, UNIT, MC)


def test_log_capacity_closed_form_numeric():
    from scipy.integrate import quad

    for s in (0.01, 1.0, 50.0):
        ref, _ = quad(lambda x: math.log2(1 + s * x) * math.exp(-x), 0, np.inf)
        assert expected_log_capacity_exponential(s) == pytest.approx(ref, rel=1e-9)
    # asymptotic branch for tiny scales, checked on both sides of the switch
    for s in (1e-3, 1.0 / 699, 1.0 / 701):
        ref, _ = quad(lambda x: math.log2(1 + s * x) * math.exp(-x), 0, np.inf,
                      epsabs=0, epsrel=1e-13)
        assert expected_log_capacity_exponential(s) == pytest.approx(ref, rel=1e-11)


def test_time_sharing_reduction_is_half_log_rate():
    for K in (2, 5):
        assert time_sharing_reduction(K, 9.0, UNIT) == pytest.approx(0.5 * capacity(9.0) / K)
        assert time_sharing_reduction(K, 9.0, UNIT) == pytest.approx(
            0.5 * baseline_rate("time_sharing", K, 9.0, UNIT, MC).value)


def test_stats_cache_and_override():
    stats = ChannelStats(UNIT, MC)
    seen = stats.track()
    r = stats.ratio(4)
    assert ("ratio", 4) in seen
    twin = stats.overridden(("ratio", 4), r.value + 0.1)
    assert twin.ratio(4).value == r.value + 0.1
    assert stats.ratio(4).value == r.value
    assert stats.min_gain(4).value == 0.25
