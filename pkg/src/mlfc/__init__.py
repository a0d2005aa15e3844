"""Multi-layer function computation over hierarchical wireless aggregation networks.

Modules
-------
topology     disorganized and layered networks, groups and subgroups
channel      fading models and seeded Monte Carlo statistics
functions    desired/group/subgroup functions and noiseless aggregation
rates        subgroup, group and network computation rates, baselines
allocation   optimal time allocation at fixed and adaptive power
experiments  config-driven sweeps and CSV output
"""

from .allocation import (AllocationSolution, SubgroupParams, apc_power_policy, kkt_check,
                         lambert_w0, solve_apc, solve_fixed_power, solve_tight_p)
from .channel import FadingModel, McConfig, expected_min_gain, expected_min_over_self_ratio
from .errors import *  # noqa: F401,F403
from .experiments import ExperimentConfig, ResultRow, emit_csv, load_config, run
from .functions import DataAssignment, FunctionSpec, eval_desired, run_aggregation
from .rates import (Allocation, ChannelStats, RateReport, baseline_rate, group_rate,
                    network_rate, network_rate_empirical, subgroup_rate_expected)
from .topology import (DisorganizedNetwork, HierarchicalNetwork, PartitionStrategy,
                       build_hierarchical, partition_group, reorganize)

__version__ = "0.1.0"
