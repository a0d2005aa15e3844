"""Config-driven sweeps over network shape and SNR, with CSV output.

A config is a TOML file. See ``configs/README.md`` for the full schema; the
short version::

    name = "layers"
    schemes = ["FPC+ATA", "FPC+OTA", "APC+ATA", "APC+OTA"]
    P_db = [20.0]

    [channel]
    family = "rayleigh_unit"

    [monte_carlo]
    samples = 100000
    seed = 1

    [topology]
    kind = "generated"
    K1 = 64
    K2 = 1
    L = 3
    C = 2

    [sweep]
    variable = "L"
    values = [3, 4, 5]

Schemes combine a power mode (``FPC`` fixed, ``APC`` adaptive) with a time
allocation (``ATA`` equal shares, ``OTA`` optimal). The relay-free baselines
``rf_comac_fpc``, ``rf_comac_apc``, ``time_sharing`` and
``improved_time_sharing`` may be listed as schemes too.
"""

from __future__ import annotations

import csv
import io
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

from .allocation import params_for_network, solve_apc, solve_fixed_power
from .channel import FadingModel, McConfig
from .errors import ConfigError, MlfcError, ZeroRateSubgroup
from .rates import (BASELINES, Allocation, ChannelStats, RateReport, apc_gain_factor,
                    baseline_rate, c_plus, network_rate)
from .topology import (DisorganizedNetwork, HierarchicalNetwork, PartitionStrategy,
                       build_hierarchical, layered_network, reorganize)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ML_SCHEMES = ("FPC+ATA", "FPC+OTA", "APC+ATA", "APC+OTA")
SCHEMES = ML_SCHEMES + BASELINES
SWEEP_VARIABLES = ("P", "K1", "K2", "L", "C")
CSV_HEADER = ["sweep_var", "sweep_value", "scheme", "L", "K1", "K2", "C", "P_db",
              "rate_bits", "std_err", "bottleneck"]


def db_to_linear(p_db):
    return 10.0 ** (p_db / 10.0)


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "generated"
    K1: int = 16
    K2: int = 1
    L: int = 2
    C: object = 1
    upper: str = "single"
    layers: tuple | None = None
    subgroups: dict | None = None
    virtual: tuple = ()
    edges: tuple | None = None
    fusion_center: int | None = None
    strategy: str = "single"

    def with_value(self, variable, value):
        if variable == "P":
            return self
        return replace(self, **{variable: value})

    def build(self) -> HierarchicalNetwork:
        if self.kind == "explicit":
            return build_hierarchical(self.layers, subgroups=self.subgroups, virtual=self.virtual)
        if self.kind == "disorganized":
            dnet = DisorganizedNetwork.from_edges(self.edges, self.fusion_center)
            return reorganize(dnet, PartitionStrategy.parse(self.strategy))
        if self.L == 2:
            if self.K2 != 1:
                raise ConfigError("topology.K2", "must be 1 when L = 2")
            sizes = [self.K1, 1]
        else:
            sizes = [self.K1, self.K2] + [1] * (self.L - 2)
        strategies = [_c_strategy(self.C)] + [PartitionStrategy.parse(self.upper)] * (self.L - 2)
        return layered_network(sizes, strategies)


def _c_strategy(C):
    if C == "all":
        return PartitionStrategy.singletons()
    if C == 1:
        return PartitionStrategy.single()
    return PartitionStrategy.balanced(C)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    topology: TopologySpec = field(default_factory=TopologySpec)
    model: FadingModel = field(default_factory=FadingModel)
    mc: McConfig = field(default_factory=McConfig)
    P_db: tuple = (10.0,)
    schemes: tuple = ML_SCHEMES
    sweep_variable: str = "P"
    sweep_values: tuple = ()
    series_variable: str | None = None
    series_values: tuple = ()
    fpc_mode: str = "jensen_bound"
    closed_forms: bool = False

    def points(self):
        """``(sweep_value, TopologySpec, P_db)`` for every sweep point."""
        bases = [self.topology]
        if self.series_variable is not None:
            bases = [self.topology.with_value(self.series_variable, s) for s in self.series_values]
        if self.sweep_variable == "P":
            return [(p, topo, p) for topo in bases for p in self.P_db]
        return [(v, topo.with_value(self.sweep_variable, v), p)
                for topo in bases for v in self.sweep_values for p in self.P_db]


@dataclass(frozen=True)
class ResultRow:
    sweep_var: str
    sweep_value: object
    scheme: str
    L: int
    K1: int
    K2: int
    C: int
    P_db: float
    rate_bits: float
    std_err: float
    bottleneck: str = ""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _need(table, key, path, kind=None):
    if key not in table:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    value = table[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{path}.{key}" if path else key, f"expected {kind}")
    return value


def _int(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(where, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(where, f"must be >= {minimum}")
    return value


def _c_value(value, where):
    if value == "all":
        return "all"
    return _int(value, where, 1)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a decoded config mapping. Errors carry the dotted field path."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a table")
    known = {"name", "schemes", "P_db", "fpc_mode", "closed_forms", "channel",
             "monte_carlo", "topology", "sweep"}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown key")

    channel = data.get("channel", {})
    family = channel.get("family", "rayleigh_unit")
    try:
        if family == "rayleigh_unit":
            model = FadingModel.rayleigh_unit()
        elif family == "exponential":
            model = FadingModel.exponential(_need(channel, "mean", "channel", (int, float)))
        elif family == "constant":
            model = FadingModel.constant(_need(channel, "gain", "channel", (int, float)))
        else:
            raise ConfigError("channel.family", f"unknown family {family!r}")
    except ValueError as exc:
        raise ConfigError("channel", str(exc)) from None

    mc_table = data.get("monte_carlo", {})
    mc = McConfig(_int(mc_table.get("samples", 100_000), "monte_carlo.samples", 1),
                  _int(mc_table.get("seed", 0), "monte_carlo.seed", 0))
    if mc.seed >= 1 << 64:
        raise ConfigError("monte_carlo.seed", "must fit in 64 bits")

    P_db = data.get("P_db", [10.0])
    if not isinstance(P_db, list) or not P_db:
        raise ConfigError("P_db", "must be a nonempty list of dB values")
    for i, p in enumerate(P_db):
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not math.isfinite(p):
            raise ConfigError(f"P_db[{i}]", "must be a finite number")
    P_db = tuple(float(p) for p in P_db)

    schemes = data.get("schemes", list(ML_SCHEMES))
    if not isinstance(schemes, list) or not schemes:
        raise ConfigError("schemes", "must be a nonempty list")
    for i, s in enumerate(schemes):
        if s not in SCHEMES:
            raise ConfigError(f"schemes[{i}]", f"unknown scheme {s!r}; choose from {list(SCHEMES)}")

    fpc_mode = data.get("fpc_mode", "jensen_bound")
    if fpc_mode not in ("jensen_bound", "exact_expectation"):
        raise ConfigError("fpc_mode", "must be jensen_bound or exact_expectation")
    closed_forms = data.get("closed_forms", False)
    if not isinstance(closed_forms, bool):
        raise ConfigError("closed_forms", "must be true or false")

    topology = _parse_topology(_need(data, "topology", "", dict))

    sweep = data.get("sweep", {"variable": "P"})
    variable = sweep.get("variable", "P")
    if variable not in SWEEP_VARIABLES:
        raise ConfigError("sweep.variable", f"must be one of {list(SWEEP_VARIABLES)}")
    values = ()
    if variable != "P":
        if topology.kind != "generated":
            raise ConfigError("sweep.variable", "only P can be swept for a fixed topology")
        raw = _need(sweep, "values", "sweep", list)
        if not raw:
            raise ConfigError("sweep.values", "must be nonempty")
        if variable == "C":
            values = tuple(_c_value(v, f"sweep.values[{i}]") for i, v in enumerate(raw))
        else:
            values = tuple(_int(v, f"sweep.values[{i}]", 1) for i, v in enumerate(raw))

    series_var = sweep.get("series_variable")
    series_values = ()
    if series_var is not None:
        if series_var not in SWEEP_VARIABLES[1:] or series_var == variable:
            raise ConfigError("sweep.series_variable",
                              "must be a topology variable other than the swept one")
        if topology.kind != "generated":
            raise ConfigError("sweep.series_variable", "needs a generated topology")
        raw = _need(sweep, "series_values", "sweep", list)
        if not raw:
            raise ConfigError("sweep.series_values", "must be nonempty")
        conv = _c_value if series_var == "C" else (lambda v, w: _int(v, w, 1))
        series_values = tuple(conv(v, f"sweep.series_values[{i}]") for i, v in enumerate(raw))

    cfg = ExperimentConfig(
        name=str(data.get("name", "experiment")), topology=topology, model=model, mc=mc,
        P_db=P_db, schemes=tuple(schemes), sweep_variable=variable, sweep_values=values,
        fpc_mode=fpc_mode, closed_forms=closed_forms, series_variable=series_var,
        series_values=series_values)
    for value, topo, _ in cfg.points():
        try:
            topo.build()
        except ConfigError:
            raise
        except MlfcError as exc:
            where = "topology" if variable == "P" else f"sweep.values ({variable}={value!r})"
            raise ConfigError(where, f"{type(exc).__name__}: {exc}") from None
    return cfg


def _parse_topology(t) -> TopologySpec:
    kind = t.get("kind", "generated")
    if kind == "generated":
        L = _int(t.get("L", 2), "topology.L", 2)
        spec = TopologySpec(kind=kind, K1=_int(_need(t, "K1", "topology"), "topology.K1", 1),
                            K2=_int(t.get("K2", 1), "topology.K2", 1), L=L,
                            C=_c_value(t.get("C", 1), "topology.C"),
                            upper=str(t.get("upper", "single")))
        try:
            PartitionStrategy.parse(spec.upper)
        except MlfcError as exc:
            raise ConfigError("topology.upper", str(exc)) from None
        return spec
    if kind == "explicit":
        layers = _need(t, "layers", "topology", list)
        raw = _need(t, "subgroups", "topology", dict)
        subgroups = {}
        for key, parts in raw.items():
            try:
                l, k = (int(x) for x in key.split(","))
            except ValueError:
                raise ConfigError(f"topology.subgroups.{key}", "key must be 'layer,node'") from None
            subgroups[(l, k)] = parts
        return TopologySpec(kind=kind, layers=tuple(tuple(x) for x in layers),
                            subgroups=subgroups, virtual=tuple(t.get("virtual", ())))
    if kind == "disorganized":
        edges = _need(t, "edges", "topology", list)
        for i, e in enumerate(edges):
            if not (isinstance(e, list) and len(e) == 2):
                raise ConfigError(f"topology.edges[{i}]", "each edge is [node, destination]")
        strategy = str(t.get("strategy", "single"))
        try:
            PartitionStrategy.parse(strategy)
        except MlfcError as exc:
            raise ConfigError("topology.strategy", str(exc)) from None
        return TopologySpec(kind=kind, edges=tuple(tuple(e) for e in edges),
                            fusion_center=_int(_need(t, "fusion_center", "topology"),
                                               "topology.fusion_center"),
                            strategy=strategy)
    raise ConfigError("topology.kind", f"unknown kind {kind!r}")


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<file>", f"not valid TOML: {exc}") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _fpc_rates(net, stats, P, mode):
    from .rates import subgroup_rate_expected

    return {key: subgroup_rate_expected(stats.model, len(net.subgroup(key)), P, mode,
                                        stats.mc, stats=stats).value
            for key in net.subgroup_keys()}


def _apc_rates(net, stats, P, allocation):
    out = {}
    for key in net.subgroup_keys():
        K = len(net.subgroup(key))
        eps = apc_gain_factor(stats.min_gain(K).value, stats.ratio(K).value, P)
        p = allocation.product(key)
        out[key] = c_plus(1.0 / K + eps / p) if p > 0 else 0.0
    return out


def evaluate_scheme(scheme, net: HierarchicalNetwork, stats: ChannelStats, P: float,
                    fpc_mode="jensen_bound") -> RateReport:
    """Rate of one ML-FC scheme on ``net`` at linear power ``P``."""
    if scheme == "FPC+ATA":
        allocation = Allocation.uniform(net)
        return network_rate(net, allocation, _fpc_rates(net, stats, P, fpc_mode))
    if scheme == "FPC+OTA":
        sol = solve_fixed_power(params_for_network(net, stats, P, fpc_mode))
        report = network_rate(net, sol.allocation(net), _fpc_rates(net, stats, P, fpc_mode))
        report.rate = sol.t
        report.extra["solution"] = sol
        return report
    if scheme == "APC+ATA":
        allocation = Allocation.uniform(net)
        return network_rate(net, allocation, _apc_rates(net, stats, P, allocation))
    if scheme == "APC+OTA":
        sol = solve_apc(params_for_network(net, stats, P, fpc_mode))
        allocation = sol.allocation(net)
        report = network_rate(net, allocation, _apc_rates(net, stats, P, allocation))
        report.rate = sol.t
        report.extra["solution"] = sol
        return report
    raise ValueError(f"unknown scheme {scheme!r}")


def _with_error(fn, stats: ChannelStats):
    """Run ``fn(stats)`` and propagate the Monte Carlo errors of the statistics it read.

    Each statistic is nudged by one standard error either way; half the
    spread of the result is its contribution, combined in quadrature.
    """
    seen = stats.track()
    result = fn(stats)
    stats.accessed = None
    var = 0.0
    for key in sorted(seen, key=repr):
        est = stats._cache[key]
        if est.std_error <= 0:
            continue
        up = fn(stats.overridden(key, est.value + est.std_error))
        down = fn(stats.overridden(key, max(est.value - est.std_error, 1e-300)))
        var += (0.5 * (_rate_of(up) - _rate_of(down))) ** 2
    return result, math.sqrt(var)


def _rate_of(result):
    return result.rate if isinstance(result, RateReport) else result.value


def _group_count(net, l=2):
    counts = [net.num_subgroups(l, k) for k in net.layers[l - 1]]
    return max(counts)


def _run_point(config, stats, point):
    value, topo, p_db = point
    rows = []
    net = topo.build()
    P = db_to_linear(p_db)
    K1 = len(net.sources)
    K2 = len(net.layers[1]) if net.num_layers > 2 else 1
    C = _group_count(net)
    for scheme in config.schemes:
        if scheme in BASELINES:
            est = baseline_rate(scheme, K1, P, config.model, config.mc, stats=stats)
            rate, se, bottleneck = est.value, est.std_error, ""
        else:
            report, se = _with_error(
                lambda s: evaluate_scheme(scheme, net, s, P, config.fpc_mode), stats)
            rate, bottleneck = report.rate, report.bottleneck_label()
        rows.append(ResultRow(config.sweep_variable, value, scheme, net.num_layers, K1, K2,
                              C, p_db, max(rate, 0.0), se, bottleneck))
    return rows


def run(config: ExperimentConfig) -> list[ResultRow]:
    """Evaluate every (sweep point, power, scheme) of ``config``.

    Rows come back sorted by series value (if any), sweep value, power, then the scheme order
    given in the config. Statistics are shared across points through a single
    cache; their random streams depend only on ``(seed, statistic, K)``, so
    the output does not depend on evaluation order.
    """
    stats = ChannelStats(config.model, config.mc, config.closed_forms)
    rows = []
    order = {s: i for i, s in enumerate(config.schemes)}
    with warnings.catch_warnings():
        # zero-rate subgroups are reported as rate 0, which is what the rows carry
        warnings.simplefilter("ignore", ZeroRateSubgroup)
        for point in config.points():
            rows.extend(_run_point(config, stats, point))

    def sort_key(row):
        v = row.sweep_value
        series = 0
        if config.series_variable is not None:
            series = getattr(row, config.series_variable)
        return (series, math.inf if v == "all" else v, row.P_db, order[row.scheme])

    return sorted(rows, key=sort_key)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def format_csv(rows) -> str:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(getattr(row, name)) for name in CSV_HEADER])
    return buf.getvalue()


def emit_csv(rows, destination) -> Path | None:
    """Write rows to a path (UTF-8, LF endings) or to an open text stream."""
    text = format_csv(rows)
    if hasattr(destination, "write"):
        destination.write(text)
        return None
    path = Path(destination)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
