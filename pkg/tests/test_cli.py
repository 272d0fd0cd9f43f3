import csv
import json
import subprocess
import sys

import pytest

from relnav.cli import csv_header, load_config, main, scenario_from_args, build_parser
from relnav.sim import ConfigError


def run_cli(*args):
    return main(list(args))


def test_run_writes_csv_and_json(tmp_path, capsys):
    rc = run_cli("run", "--preset", "roe1", "--orbits", "0.03", "--seed", "3", "--out", str(tmp_path))
    assert rc == 0
    rows = list(csv.reader(open(tmp_path / "roe1_seed3.csv")))
    assert rows[0] == csv_header()
    assert len(rows) > 10
    assert all(len(r) == len(rows[0]) for r in rows)
    t = [float(r[0]) for r in rows[1:]]
    assert t == sorted(t)
    summary = json.loads((tmp_path / "roe1_seed3.json").read_text())
    assert summary["seed"] == 3 and summary["asnc"] is True
    assert summary["full"]["window"] == "full" and summary["second_orbit"] is None
    assert "wrote" in capsys.readouterr().out


def test_output_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("RELNAV_OUT", str(tmp_path / "env"))
    assert run_cli("run", "--orbits", "0.02", "--out", str(tmp_path / "flag")) == 0
    assert (tmp_path / "env" / "roe1_seed0.csv").exists()
    assert not (tmp_path / "flag").exists()


def test_psd_units_flag(tmp_path):
    assert run_cli("run", "--orbits", "0.02", "--psd-units", "angular", "--out", str(tmp_path)) == 0
    assert json.loads((tmp_path / "roe1_seed0.json").read_text())["psd_att_units"] == "(rad/s^2)^2 s"


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text(
        "[scenario]\npreset = 'roe2'\nseed = 5\norbits = 1.0\n"
        "[scenario.servicer]\ni_deg = 97.0\n[scenario.roe]\ndlam = -10.0\n"
        "[filter]\nq0 = 1e-6\nwindow = 30\n"
    )
    args = build_parser().parse_args(["run", "--config", str(cfg), "--seed", "9", "--asnc", "off"])
    s = scenario_from_args(args)
    assert s.name == "roe2" and s.seed == 9 and s.n_orbits == 1.0
    assert s.filter.q0 == 1e-6 and s.filter.window == 30 and not s.filter.asnc
    assert s.roe.dlam * s.servicer.a == pytest.approx(-10.0)
    assert s.servicer.i == pytest.approx(0.0174533 * 97.0, rel=1e-6)


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario]\nwarp = 9\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert run_cli("run", "--config", str(bad)) == 2
    bad.write_text("[extra]\nx = 1\n")
    assert run_cli("run", "--config", str(bad)) == 2
    bad.write_text("[filter]\nnot_a_field = 1\n")
    assert run_cli("run", "--config", str(bad)) == 2
    bad.write_text("this is not toml = = =")
    assert run_cli("run", "--config", str(bad)) == 2
    assert run_cli("run", "--config", str(tmp_path / "missing.toml")) == 2
    assert "relnav: error" in capsys.readouterr().err


def test_bad_flag_value_exits():
    with pytest.raises(SystemExit):
        run_cli("run", "--preset", "roe3")


def test_mc_and_sweep(tmp_path):
    assert run_cli("mc", "--runs", "2", "--noise", "conservative", "--orbits", "0.02",
                   "--out", str(tmp_path)) == 0
    header = (tmp_path / "roe1_mc_conservative.csv").read_text().splitlines()[0]
    assert header == "t_s,e_t_mean_m,e_t_std_m,e_q_mean_deg,e_q_std_deg"
    meta = json.loads((tmp_path / "roe1_mc_conservative.json").read_text())
    assert meta["sigma"]["sigma_r"] == 10.0 and len(meta["runs"]) == 2
    assert run_cli("sweep", "--grid", "1e-7,1e-6", "--orbits", "0.02", "--modes", "on",
                   "--out", str(tmp_path)) == 0
    rows = list(csv.reader(open(tmp_path / "roe1_q0_sweep.csv")))
    assert rows[0] == ["q0", "e_pose_asnc_on"] and [r[0] for r in rows[1:]] == ["1e-07", "1e-06"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "relnav", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("relnav ")
