import json
from pathlib import Path

import pytest

from amerdiv.cli import main, run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, cfg):
    path = tmp_path / "job.json"
    path.write_text(json.dumps(cfg))
    return str(path)


BASE = {
    "command": "price",
    "model": {"r0": 0.01, "s0": 0.6},
    "option": {"kind": "Put", "strike": 100.0, "maturity": 0.25,
               "spot": 100.0},
    "numerics": {"N": 32},
}


def test_price_job(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "out"
    assert run(cfg, out_dir=str(out)) == 0
    report = json.loads((out / "price_report.json").read_text())
    assert report["boundary_status"] == "ok"
    assert report["price"] > report["european"]
    assert (out / "price_boundary.csv").exists()


def test_no_boundary_price_job(tmp_path, capsys):
    cfg = dict(BASE, model={"r0": -0.01, "s0": 0.6})
    out = tmp_path / "out"
    assert run(_write(tmp_path, cfg), out_dir=str(out)) == 0
    report = json.loads((out / "price_report.json").read_text())
    assert report["boundary_status"] == "no_boundary"
    assert report["price"] == report["european"]


def test_malformed_config_no_partial_files(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    out = tmp_path / "out"
    assert run(str(path), out_dir=str(out)) == 1
    assert not out.exists()


def test_unknown_keys_rejected(tmp_path, capsys):
    cfg = dict(BASE, extra_field=1)
    out = tmp_path / "out"
    assert run(_write(tmp_path, cfg), out_dir=str(out)) == 1
    assert not out.exists()
    cfg = dict(BASE, numerics={"N": 32, "frobnicate": True})
    assert run(_write(tmp_path, cfg), out_dir=str(out)) == 1
    assert not out.exists()


def test_set_overrides(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "out"
    assert run(cfg, sets=["model.r0=-0.01"], out_dir=str(out)) == 0
    report = json.loads((out / "price_report.json").read_text())
    assert report["boundary_status"] == "no_boundary"


def test_byte_identical_reruns(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(cfg, out_dir=str(a)) == 0
    assert run(cfg, out_dir=str(b)) == 0
    for fa in sorted(a.iterdir()):
        fb = b / fa.name
        assert fa.read_bytes() == fb.read_bytes()


def test_boundary_command_csv_columns(tmp_path, capsys):
    cfg = dict(BASE, command="boundary")
    out = tmp_path / "out"
    assert run(_write(tmp_path, cfg), out_dir=str(out)) == 0
    header = (out / "boundary_boundary.csv").read_text().splitlines()[0]
    assert header == "t,tau,y,S_B,status,is_dividend_node"


def test_density_command(tmp_path, capsys):
    cfg = dict(BASE, command="density", density_time=0.2)
    out = tmp_path / "out"
    assert run(_write(tmp_path, cfg), out_dir=str(out)) == 0
    report = json.loads((out / "density_report.json").read_text())
    assert abs(report["mass"] - 1.0) < 1e-6
    assert (out / "density_density.csv").exists()


def test_implied_requires_market_price(tmp_path, capsys):
    cfg = dict(BASE, command="implied")
    assert run(_write(tmp_path, cfg), out_dir=str(tmp_path / "out")) == 1


def test_implied_numerical_failure_exit_2(tmp_path, capsys):
    cfg = dict(BASE, command="implied", market_price=99.0)  # near strike cap
    cfg["numerics"] = {"N": 32, "sigma_bracket": [0.05, 0.2]}
    out = tmp_path / "out"
    assert run(_write(tmp_path, cfg), out_dir=str(out)) == 2
    diag = json.loads((out / "implied_failure_report.json").read_text())
    assert diag["error"] == "NoSolutionError"


def test_compare_command_on_golden_config(tmp_path, capsys):
    assert (CONFIGS / "test1.json").is_file()
    out = tmp_path / "out"
    code = main(["--config", str(CONFIGS / "test1.json"),
                 "--set", "numerics.N=32", "--set", "numerics.tree_steps=400",
                 "--out", str(out)])
    assert code == 0
    report = json.loads((out / "test1_report.json").read_text())
    assert report["max_rel_dev"] < 0.02
    assert (out / "test1_plot_data.csv").exists()


def test_all_golden_configs_parse(capsys):
    from amerdiv.cli import Job, _load_config
    for name in ("test1", "test1-highvol", "test2", "prop-div", "cash-div",
                 "all-div"):
        Job(_load_config(str(CONFIGS / f"{name}.json"), []))
