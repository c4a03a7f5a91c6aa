import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from slipdyn.cli import main
from slipdyn.config import ConfigError, load_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


def test_unknown_keys_rejected(tmp_path):
    p = write_config(tmp_path, {"experiment": "kernel_check",
                                "kernel_check": {}, "bogus": 1})
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(p)
    p2 = write_config(tmp_path, {"experiment": "kernel_check",
                                 "kernel_check": {"quad_n": 64, "junk": 2}})
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(p2)


def test_missing_section_rejected(tmp_path):
    p = write_config(tmp_path, {"experiment": "simulate"})
    with pytest.raises(ConfigError):
        load_config(p)


def test_sigma_kinds(tmp_path):
    p = write_config(tmp_path, {
        "experiment": "simulate",
        "loading": {"kind": "uniform_shear",
                    "sigma": {"kind": "piecewise_linear",
                              "times": [0.0, 1.0, 2.0], "values": [0.0, 1.0, 1.0]},
                    "time_horizon": 2.0},
        "evolution": {"initial_points": [[0.5, 0.5]]},
        "schedule": {"r_coef": 0.05},
    })
    cfg = load_config(p)
    assert cfg.loading.sigma(0.5) == 0.5
    assert cfg.loading.sigma(1.5) == 1.0
    assert cfg.loading.sigma_dot(0.5) == 1.0
    assert cfg.loading.sigma_dot(1.5) == 0.0


def test_kernel_check_command(tmp_path):
    runner = CliRunner()
    out = tmp_path / "out"
    res = runner.invoke(main, ["kernel-check", str(CONFIG_DIR / "kernel_check.json"),
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = (out / "kernel_check.csv").read_text().strip().splitlines()
    assert rows[0].startswith("# slipdyn")
    body = [r.split(",") for r in rows[2:]]
    assert all(r[-1] == "True" for r in body)
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["all_passed"] is True


def test_kernel_check_negative_control(tmp_path):
    payload = json.loads((CONFIG_DIR / "kernel_check.json").read_text())
    payload["kernel_check"]["break_traction"] = True
    p = write_config(tmp_path, payload)
    runner = CliRunner()
    out = tmp_path / "out"
    res = runner.invoke(main, ["kernel-check", str(p), "--out", str(out)])
    assert res.exit_code == 0
    rows = [r.split(",") for r in
            (out / "kernel_check.csv").read_text().strip().splitlines()[2:]]
    traction = [r for r in rows if r[0] == "core_traction_Kn"]
    assert traction and traction[0][-1] == "False"


def test_distance_command(tmp_path):
    runner = CliRunner()
    out = tmp_path / "out"
    res = runner.invoke(main, ["distance", str(CONFIG_DIR / "distance_pair.json"),
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = [r.split(",") for r in
            (out / "distance.csv").read_text().strip().splitlines()[2:]]
    vals = {(r[0], r[1]): r[2] for r in rows}
    assert float(vals[("slip_distance", "")]) == 1.0
    assert float(vals[("eps_relaxed", "0.001")]) == 1.0
    assert float(vals[("dual_bound", "neg_x1")]) == 1.0
    duals = [float(v) for (q, _), v in vals.items() if q == "dual_bound"]
    assert all(d <= 1.0 + 1e-12 for d in duals)


def test_distance_infinite_report(tmp_path):
    p = write_config(tmp_path, {
        "experiment": "distance",
        "distance": {"mu": [[0.0, 0.0, 1.0]], "nu": [[1.0, 1.0, 1.0]]},
    })
    runner = CliRunner()
    out = tmp_path / "out"
    res = runner.invoke(main, ["distance", str(p), "--out", str(out)])
    assert res.exit_code == 0
    text = (out / "distance.csv").read_text()
    assert "slip_distance,,inf" in text


def test_simulate_determinism(tmp_path):
    runner = CliRunner()
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        res = runner.invoke(main, ["simulate", str(CONFIG_DIR / "zero_load.json"),
                                   "--out", str(out), "--seed", "0"])
        assert res.exit_code == 0, res.output
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "metadata.json").read_bytes() == (b / "metadata.json").read_bytes()


def test_simulate_zero_load_trace(tmp_path):
    import csv
    runner = CliRunner()
    out = tmp_path / "out"
    res = runner.invoke(main, ["simulate", str(CONFIG_DIR / "zero_load.json"),
                               "--out", str(out)])
    assert res.exit_code == 0
    with open(out / "trace.csv") as fh:
        fh.readline()                     # comment header
        rows = list(csv.DictReader(fh))
    assert all(float(r["cumulative_d"]) == 0.0 for r in rows)


def test_subcommand_kind_mismatch(tmp_path):
    runner = CliRunner()
    res = runner.invoke(main, ["simulate", str(CONFIG_DIR / "kernel_check.json")])
    assert res.exit_code == 2
    assert "declares experiment" in res.output


def test_gamma_freespace_closed_form(tmp_path):
    import math
    # n = 1 has an empty pair sum; n = 2 lands on two cell centers at distance
    # 0.2, so the table entry is the closed-form log pair sum
    payload = json.loads((CONFIG_DIR / "gamma_uniform.json").read_text())
    payload["gamma"]["n_ladder"] = [1, 2]
    payload["gamma"]["mode"] = "freespace"
    payload["schedule"] = {"r_coef": 0.1}   # default minimum separation binds at n = 2
    p = write_config(tmp_path, payload)
    runner = CliRunner()
    out = tmp_path / "out"
    res = runner.invoke(main, ["gamma", str(p), "--out", str(out)])
    assert res.exit_code == 0, res.output
    import csv
    with open(out / "gamma.csv") as fh:
        fh.readline()
        rows = {int(r["n"]): r for r in csv.DictReader(fh)}
    assert float(rows[1]["f_n"]) == 0.0
    coef = 2 / (3 * math.pi)
    expected = 2 * (-coef * math.log(0.2)) / (2 * 4)
    assert float(rows[2]["f_n"]) == pytest.approx(expected, rel=1e-12)


def test_module_error_exits_nonzero(tmp_path):
    # unstable initial data without pre-relaxation must fail with a diagnostic
    p = write_config(tmp_path, {
        "experiment": "simulate",
        "schedule": {"r_coef": 0.05},
        "loading": {"kind": "uniform_shear",
                    "sigma": {"kind": "constant", "value": 0.0},
                    "time_horizon": 1.0},
        "evolution": {"initial_points": [[0.475, 0.5], [0.525, 0.5]],
                      "steps": 5, "pre_relax": False},
    })
    runner = CliRunner()
    res = runner.invoke(main, ["simulate", str(p), "--out", str(tmp_path / "o")])
    assert res.exit_code == 1
    assert "unstable" in res.output


def test_metadata_carries_config_hash(tmp_path):
    runner = CliRunner()
    out = tmp_path / "out"
    res = runner.invoke(main, ["kernel-check", str(CONFIG_DIR / "kernel_check.json"),
                               "--out", str(out)])
    assert res.exit_code == 0
    cfg = load_config(CONFIG_DIR / "kernel_check.json")
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config_sha256"] == cfg.sha
    header = (out / "kernel_check.csv").read_text().splitlines()[0]
    assert cfg.sha in header
