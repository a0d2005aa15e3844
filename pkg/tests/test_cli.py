import json
from pathlib import Path

import pytest

from mlfc.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_config(tmp_path, extra=""):
    path = tmp_path / "c.toml"
    path.write_text(f"""
name = "small"
schemes = ["FPC+ATA", "APC+OTA"]
P_db = [0.0, 10.0]
{extra}
[monte_carlo]
samples = 2000
seed = 5

[topology]
kind = "generated"
K1 = 8
K2 = 2
L = 3
C = 2
""")
    return path


def test_run_writes_csv_and_plot(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", str(small_config(tmp_path)), "--out", str(out), "--plot"]) == 0
    assert out.read_text().count("\n") == 5
    assert out.with_suffix(".png").stat().st_size > 0


def test_run_to_stdout_with_overrides(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert main(["run", str(cfg), "--seed", "9", "--samples", "1000"]) == 0
    a = capsys.readouterr().out
    assert a.startswith("sweep_var,")
    assert main(["run", str(cfg), "--seed", "9", "--samples", "1000"]) == 0
    assert capsys.readouterr().out == a
    assert main(["run", str(cfg), "--seed", "10", "--samples", "1000"]) == 0
    assert capsys.readouterr().out != a


def test_validate(tmp_path, capsys):
    assert main(["validate", str(small_config(tmp_path))]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info == {"ok": True, "name": "small", "points": 2, "rows": 4}


def test_config_error_is_json_line(tmp_path, capsys):
    code = main(["validate", str(small_config(tmp_path, 'fpc_mode = "x"'))])
    assert code != 0
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError" and err["field"] == "fpc_mode"


def test_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.toml")]) != 0
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_bad_seed(tmp_path, capsys):
    assert main(["run", str(small_config(tmp_path)), "--seed", "-1"]) != 0
    assert "field" in json.loads(capsys.readouterr().err)


@pytest.mark.parametrize("case, key", [("lp-fixed-power", "max_abs_gap"),
                                       ("apc-grid", "max_grid_excess")])
def test_oracles(case, key, capsys):
    assert main(["oracle", case, "--instances", "3"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result[key] <= 1e-9


def test_ratio_oracle_small(capsys):
    assert main(["oracle", "ratio", "--samples", "20000"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert all(abs(e["z"]) < 5 for e in result["estimates"])


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "mlfc", "validate",
                           str(CONFIGS / "layers.toml")], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["ok"]
