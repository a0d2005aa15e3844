import io
from dataclasses import replace
from pathlib import Path

import pytest

from mlfc.channel import McConfig
from mlfc.errors import ConfigError
from mlfc.experiments import (CSV_HEADER, ML_SCHEMES, ResultRow, emit_csv, format_csv,
                              load_config, parse_config, read_csv, run)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def base(**over):
    data = {
        "schemes": list(ML_SCHEMES),
        "P_db": [10.0],
        "monte_carlo": {"samples": 5000, "seed": 1},
        "topology": {"kind": "generated", "K1": 8, "K2": 2, "L": 3, "C": 2},
    }
    data.update(over)
    return data


def test_parse_defaults():
    cfg = parse_config(base())
    assert cfg.sweep_variable == "P"
    assert [p[2] for p in cfg.points()] == [10.0]


@pytest.mark.parametrize("data, field", [
    (base(schemes=["FPC+XYZ"]), "schemes[0]"),
    (base(P_db=[]), "P_db"),
    (base(P_db=["x"]), "P_db[0]"),
    (base(monte_carlo={"samples": 0}), "monte_carlo.samples"),
    (base(topology={"kind": "generated"}), "topology.K1"),
    (base(topology={"kind": "mesh"}), "topology.kind"),
    (base(sweep={"variable": "Q"}), "sweep.variable"),
    (base(sweep={"variable": "L", "values": []}), "sweep.values"),
    (base(sweep={"variable": "C", "values": [1, "most"]}), "sweep.values[1]"),
    (base(channel={"family": "rician"}), "channel.family"),
    (base(fpc_mode="exact"), "fpc_mode"),
    (base(extra=1), "extra"),
])
def test_config_errors_carry_field(data, field):
    with pytest.raises(ConfigError) as err:
        parse_config(data)
    assert err.value.field == field


def test_infeasible_sweep_point_reported():
    with pytest.raises(ConfigError) as err:
        parse_config(base(sweep={"variable": "C", "values": [2, 9]}))
    assert "sweep.values" in err.value.field


def test_l2_requires_single_group():
    with pytest.raises(ConfigError):
        parse_config(base(topology={"kind": "generated", "K1": 8, "K2": 2, "L": 2}))


def test_run_rows_and_order():
    cfg = parse_config(base(P_db=[20.0, 0.0], schemes=["APC+OTA", "FPC+ATA", "time_sharing"]))
    rows = run(cfg)
    assert [(r.P_db, r.scheme) for r in rows] == [
        (0.0, "APC+OTA"), (0.0, "FPC+ATA"), (0.0, "time_sharing"),
        (20.0, "APC+OTA"), (20.0, "FPC+ATA"), (20.0, "time_sharing")]
    assert all(r.rate_bits >= 0 for r in rows)
    assert all((r.L, r.K1, r.K2, r.C) == (3, 8, 2, 2) for r in rows)
    assert rows[1].bottleneck.count(":") == 2
    assert rows[2].bottleneck == ""


def test_scheme_dominance_on_sweep():
    cfg = parse_config(base(
        P_db=[0.0, 10.0, 20.0, 30.0], monte_carlo={"samples": 20000, "seed": 4},
        topology={"kind": "generated", "K1": 32, "K2": 2, "L": 3, "C": 2},
        sweep={"variable": "K1", "values": [8, 32, 64]}))
    rows = run(cfg)
    points = {}
    for r in rows:
        points.setdefault((r.sweep_value, r.P_db), {})[r.scheme] = r
    for pt in points.values():
        def ge(a, b):
            tol = 3 * (pt[a].std_err ** 2 + pt[b].std_err ** 2) ** 0.5 + 1e-12
            return pt[a].rate_bits >= pt[b].rate_bits - tol
        assert ge("APC+OTA", "APC+ATA")
        assert ge("APC+OTA", "FPC+OTA")
        assert ge("FPC+OTA", "FPC+ATA")


def test_std_err_only_from_monte_carlo_stats():
    cfg = parse_config(base(schemes=["FPC+OTA", "APC+OTA"]))
    fpc, apc = run(cfg)
    # exponential E[min g] is exact; only the ratio statistic is estimated
    assert fpc.std_err == 0.0
    assert apc.std_err > 0.0
    closed = run(replace(cfg, closed_forms=True))
    assert closed[1].std_err == 0.0
    assert abs(closed[1].rate_bits - apc.rate_bits) < 4 * apc.std_err


def test_series_variable():
    cfg = parse_config(base(sweep={"variable": "K1", "values": [8, 16],
                                   "series_variable": "K2", "series_values": [1, 4]}))
    rows = run(cfg)
    assert [(r.K2, r.K1) for r in rows[::4]] == [(1, 8), (1, 16), (4, 8), (4, 16)]


def test_csv_format(tmp_path):
    rows = [ResultRow("P", 10.0, "FPC+ATA", 2, 4, 1, 1, 10.0, 1 / 3, 0.0, "2:5:0")] * 3
    path = emit_csv(rows, tmp_path / "out.csv")
    raw = path.read_bytes()
    assert raw.count(b"\n") == 4 and b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "P,10,FPC+ATA,2,4,1,1,10,0.333333333333,0,2:5:0"
    assert read_csv(path)[0]["rate_bits"] == "0.333333333333"
    buf = io.StringIO()
    emit_csv(rows, buf)
    assert buf.getvalue() == raw.decode()


def test_csv_empty_rows():
    with pytest.raises(ValueError):
        format_csv([])


def test_csv_unwritable(tmp_path):
    rows = [ResultRow("P", 0.0, "FPC+ATA", 2, 4, 1, 1, 0.0, 0.1, 0.0)]
    with pytest.raises(OSError):
        emit_csv(rows, tmp_path / "missing" / "out.csv")


def test_same_seed_same_bytes_different_seed_differs():
    cfg = parse_config(base(schemes=["APC+OTA", "rf_comac_apc"]))
    a = format_csv(run(cfg))
    assert a == format_csv(run(cfg))
    other = replace(cfg, mc=McConfig(cfg.mc.samples, cfg.mc.seed + 1))
    assert format_csv(run(other)) != a


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    cfg = load_config(path)
    assert cfg.points()


def test_explicit_and_disorganized_configs_run():
    for name in ("four_layer.toml", "disorganized_tree.toml"):
        cfg = load_config(CONFIGS / name)
        cfg = replace(cfg, mc=McConfig(2000, 1))
        rows = run(cfg)
        assert rows and all(r.rate_bits >= 0 for r in rows)


def test_bad_toml(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("name = [\n")
    with pytest.raises(ConfigError) as err:
        load_config(bad)
    assert err.value.field == "<file>"
