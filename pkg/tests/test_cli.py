import json
import math
import textwrap

import pytest

from parametron import cli
from parametron import experiments as ex

BASE = """
[experiment]
scenario = cat-creation

[model]
beta0_over_2pi_mhz = 200
chi_over_2pi_mhz = 68
omega_p_over_2pi_ghz = 16
delta_over_2pi_mhz = -6.7
delta0_over_2pi_mhz = -67

[schedule]
detuning_mode = constant, linear-decay
t_ramp_ns = 10

[numerics]
dynamics = rwa
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


def test_parse_converts_units(tmp_path):
    parsed = cli.parse_config(write(tmp_path, BASE))
    cfg = parsed.config
    assert cfg.beta0 == pytest.approx(2 * math.pi * 0.2)
    assert cfg.omega_p == pytest.approx(2 * math.pi * 16)
    assert cfg.delta == pytest.approx(-2 * math.pi * 6.7e-3)
    assert cfg.detuning_modes == ("constant", "linear-decay")
    assert cfg.t_ramp == (10.0,)
    assert cfg.dt is None and parsed.defaulted == ["dt_fs"]


def test_dt_in_femtoseconds(tmp_path):
    parsed = cli.parse_config(write(tmp_path, BASE + "dt_fs = 500\n"))
    assert parsed.config.dt == pytest.approx(5e-4)
    assert parsed.defaulted == []


def test_negative_chi_names_key_and_line(tmp_path):
    path = write(tmp_path, BASE.replace("chi_over_2pi_mhz = 68", "chi_over_2pi_mhz = -5"))
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(path)
    assert err.value.key == "chi_over_2pi_mhz"
    assert err.value.line == 7
    assert "chi_over_2pi_mhz" in str(err.value) and "line 7" in str(err.value)


def test_positive_delta0_rejected(tmp_path):
    path = write(tmp_path, BASE.replace("delta0_over_2pi_mhz = -67", "delta0_over_2pi_mhz = 67"))
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(path)
    assert err.value.key == "delta0_over_2pi_mhz"


def test_unknown_key(tmp_path):
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(write(tmp_path, BASE + "frobnicate = 3\n"))
    assert err.value.key == "frobnicate"
    assert err.value.line == BASE.count("\n") + 1


def test_unknown_section(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.parse_config(write(tmp_path, BASE + "[extras]\nx = 1\n"))


def test_missing_required_key(tmp_path):
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(write(tmp_path, BASE.replace("omega_p_over_2pi_ghz = 16\n", "")))
    assert err.value.key == "omega_p_over_2pi_ghz"


def test_gate_scenario_needs_gate_time(tmp_path):
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(write(tmp_path, BASE), scenario="rz-gate")
    assert err.value.key == "t_gate_ns"


def test_bad_value_text(tmp_path):
    with pytest.raises(cli.ConfigError) as err:
        cli.parse_config(write(tmp_path, BASE.replace("t_ramp_ns = 10", "t_ramp_ns = ten")))
    assert err.value.key == "t_ramp_ns"


def test_decay_mode_needs_delta0(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.parse_config(write(tmp_path, BASE.replace("delta0_over_2pi_mhz = -67\n", "")))


def test_fmt():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert cli.fmt(3) == "3"
    assert cli.fmt(True) == "true"
    assert cli.fmt("pass") == "pass"


def test_run_outputs_and_manifest(tmp_path):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "out"
    assert cli.main(["run", "cat-creation", "--config", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["defaulted"] == ["dt_fs"]
    assert manifest["dt_fs"] == pytest.approx(1000.0)
    assert manifest["resolved_parameters"]["chi"] == pytest.approx(ex.mhz(68))
    for name in manifest["outputs"]:
        assert (out / name).exists()
    stats = (out / "stats_constant-rwa.csv").read_text()
    assert stats.splitlines()[0] == ",".join(cli.STATS_HEADER)
    row = stats.splitlines()[1].split(",")
    assert row[0] == "10" and row[-1] == "pass" and row[4] == "1000"
    traj = (out / "trajectory_constant-rwa_10.csv").read_text().splitlines()
    assert traj[0] == "t_ns,p0,p1,p2,p3,p4,p5,p6,p7,p8,norm_or_trace"
    assert len(traj) == 1 + 301


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, BASE)
    for d in ("a", "b"):
        assert cli.main(["cat-creation", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("stats_constant-rwa.csv", "stats_linear-decay-rwa.csv", "trajectory_linear-decay-rwa_10.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["config_hash"] == mb["config_hash"]


def test_cli_overrides_change_hash(tmp_path):
    cfg = write(tmp_path, BASE)
    cli.main(["cat-creation", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["cat-creation", "--config", str(cfg), "--out", str(tmp_path / "b"), "--dim", "30", "--dt-fs", "500"])
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["config_hash"] != mb["config_hash"]
    assert mb["dim"] == 30 and mb["dt_fs"] == pytest.approx(500.0)


def test_config_error_exit_code(tmp_path, capsys):
    path = write(tmp_path, BASE.replace("chi_over_2pi_mhz = 68", "chi_over_2pi_mhz = -5"))
    assert cli.main(["cat-creation", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "chi_over_2pi_mhz" in capsys.readouterr().err


def test_propagation_failure_marks_manifest(tmp_path):
    text = BASE.replace("dynamics = rwa", "dynamics = nrot\ncheck_convergence = false").replace(
        "detuning_mode = constant, linear-decay", "detuning_mode = constant")
    cfg = write(tmp_path, text)
    out = tmp_path / "o"
    code = cli.main(["cat-creation", "--config", str(cfg), "--out", str(out), "--dt-fs", "5000"])
    assert code == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert "error" in manifest["convergence_status"]
    assert (out / "stats_constant-nrot.csv").exists()


def test_figures_and_wigner_scenario(tmp_path):
    text = BASE.replace("detuning_mode = constant, linear-decay", "detuning_mode = linear-decay")
    cfg = write(tmp_path, text)
    out = tmp_path / "w"
    assert cli.main(["wigner", "--config", str(cfg), "--out", str(out), "--figures"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    wig = [n for n in manifest["outputs"] if n.startswith("wigner_") and n.endswith(".csv")]
    pngs = [n for n in manifest["outputs"] if n.endswith(".png")]
    assert len(wig) == 4 and len(pngs) == 4
    lines = (out / wig[0]).read_text().splitlines()
    assert lines[0] == "x,p,W" and len(lines) == 1 + 81 * 81


def test_decay_study_scenario(tmp_path):
    text = BASE + "\n[sweep]\nkappa_over_2pi_khz = 0, 10\n"
    text = text.replace("detuning_mode = constant, linear-decay", "detuning_mode = linear-decay")
    text = text.replace("[numerics]\n", "[numerics]\ncheck_convergence = false\n")
    out = tmp_path / "d"
    assert cli.main(["decay-study", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    assert (out / "stats_linear-decay-rwa-kappa10khz.csv").exists()


def test_parser_lists_all_scenarios():
    parser = cli.build_parser()
    for name in cli.SCENARIOS:
        args = parser.parse_args([name, "--config", "x.cfg"])
        assert args.command == name
    args = parser.parse_args(["run", "rz-gate", "--config", "x.cfg", "--threads", "2"])
    assert args.scenario == "rz-gate" and args.threads == 2
