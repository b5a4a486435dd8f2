import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lel.cli import ConfigError, main, parse_config
from lel.greens import green_disk

EIGHT_PI_E = 8 * math.pi * math.e


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


def _radial(tmp_path, **kw):
    cfg = {"domain": {"kind": "unit-disk"}, "solver": "radial", "theta": 0.0,
           "p_grid": [10, 20, 50, 100, 200, 400], "beta": 100.0, "probes": [[0.5, 0.0]],
           "output": str(tmp_path / "out")}
    cfg.update(kw)
    return cfg


# ---------------------------------------------------------------- config errors
def test_decreasing_p_grid(tmp_path, capsys):
    cfg = _write(tmp_path, _radial(tmp_path, p_grid=[20, 10]))
    assert main(["verify", "--config", cfg]) == 2
    assert "field 'p_grid'" in capsys.readouterr().err


def test_unknown_key(tmp_path, capsys):
    cfg = _write(tmp_path, _radial(tmp_path, colour="red"))
    assert main(["radial-sweep", "--config", cfg]) == 2
    assert "field 'colour'" in capsys.readouterr().err


def test_bad_json_reports_position(tmp_path, capsys):
    cfg = _write(tmp_path, '{"solver": "radial",\n  "theta": }')
    assert main(["verify", "--config", cfg]) == 2
    assert f"{cfg}:2:" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    cfg = _write(tmp_path, _radial(tmp_path))
    assert main(["frobnicate", "--config", cfg]) == 2
    assert main([]) == 2
    assert main(["verify"]) == 2
    assert main(["verify", "--config", cfg, "--jobs", "0"]) == 2
    assert main(["verify", "--config", str(tmp_path / "missing.json")]) == 2


def test_parse_config_rules():
    with pytest.raises(ConfigError):
        parse_config({"domain": {"kind": "rectangle"}, "solver": "radial", "p_grid": [10]})
    with pytest.raises(ConfigError):
        parse_config({"domain": {"kind": "unit-disk"}, "theta": -1, "p_grid": [10]})
    cfg = parse_config({"domain": {"kind": "unit-disk"}, "p_grid": [10]})
    assert cfg.theta == 0.0 and cfg.p_grid == [10.0]


# ---------------------------------------------------------------- subcommands
def test_greens_matches_closed_form(tmp_path):
    cfg = _write(tmp_path, {"domain": {"kind": "unit-disk"}, "solver": "fem", "grid_step": 0.1,
                            "seeds": [[0.3, 0.2]], "output": str(tmp_path / "g")})
    assert main(["greens", "--config", cfg]) == 0
    with open(tmp_path / "g" / "robin.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) > 200
    for r in rows:
        x = np.array([float(r["x"]), float(r["y"])])
        assert abs(float(r["R"]) + math.log(1 - x @ x) / (2 * math.pi)) <= 1e-10
    with open(tmp_path / "g" / "green.csv") as fh:
        for r in csv.DictReader(fh):
            x = (float(r["x"]), float(r["y"]))
            assert abs(float(r["G"]) - green_disk(x, (0.3, 0.2))) <= 1e-10


def test_singleton_radial_sweep(tmp_path):
    cfg = _write(tmp_path, _radial(tmp_path, p_grid=[50]))
    out = tmp_path / "out"
    assert main(["radial-sweep", "--config", cfg]) == 0
    assert sorted(f.name for f in out.iterdir()) == ["radial_p50.json", "trajectory_p50.csv"]
    rec = json.loads((out / "radial_p50.json").read_text())
    assert rec["p"] == 50
    with open(out / "trajectory_p50.csv") as fh:
        assert fh.readline().strip() == "s,r,u,v,u_s,v_s"


def test_verify_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        cfg = _write(tmp_path, _radial(tmp_path, output=str(tmp_path / f"o{k}")), f"c{k}.json")
        assert main(["verify", "--config", cfg]) == 0
        outs.append(tmp_path / f"o{k}")
    names = sorted(f.name for f in outs[0].iterdir())
    assert "verdict.json" in names and "summary.csv" in names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n
    v = json.loads((outs[0] / "verdict.json").read_text())
    assert v["all_passed"] and {c["name"] for c in v["checks"]} >= {
        "peak_limit", "energy_limit", "L_p_limit", "outer_field_limit", "theta0_collapse",
        "energy_identity", "beta_budget"}
    for c in v["checks"]:
        assert set(c) == {"name", "measured", "target", "tolerance", "passed", "note"}
    assert main(["report", "--config", _write(tmp_path, _radial(tmp_path, output=str(outs[0])),
                                              "r.json")]) == 0
    assert (outs[0] / "verdict.json").read_bytes() == (outs[1] / "verdict.json").read_bytes()


def test_no_check_skips_verdict(tmp_path):
    cfg = _write(tmp_path, _radial(tmp_path, p_grid=[10, 20]))
    assert main(["verify", "--config", cfg, "--no-check"]) == 0
    assert not (tmp_path / "out" / "verdict.json").exists()
    assert (tmp_path / "out" / "summary.csv").exists()


def test_beta_budget_single_peak(tmp_path):
    # ceil(β / 8πe) = 1 for any β <= 8πe, so one radial peak always fits
    cfg = _write(tmp_path, _radial(tmp_path, beta=EIGHT_PI_E * 0.5))
    code = main(["verify", "--config", cfg])
    v = json.loads((tmp_path / "out" / "verdict.json").read_text())
    budget = [c for c in v["checks"] if c["name"] == "beta_budget"][0]
    assert budget["passed"] and code == 0


def test_theta_one_gap_check(tmp_path):
    cfg = _write(tmp_path, _radial(tmp_path, theta=1.0))
    assert main(["verify", "--config", cfg, "--jobs", "2"]) == 0
    v = json.loads((tmp_path / "out" / "verdict.json").read_text())
    gap = [c for c in v["checks"] if c["name"] == "gap_limit"][0]
    assert gap["target"] == pytest.approx(math.sqrt(math.e) / 2, rel=1e-12)


def test_module_entry_point_and_bundled_config(tmp_path):
    r = subprocess.run([sys.executable, "-m", "lel", "radial-sweep", "--config",
                        "radial_theta0.json", "--out", str(tmp_path / "b")],
                       capture_output=True, text=True, timeout=300)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "b" / "radial_p400.json").exists()
