import json

import pytest

from aggdiff.cli import cli_main


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("AGGDIFF_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def test_missing_config_exits_2_and_names_path(out_root, capsys):
    assert cli_main(["simulate", "--config", "nope/absent.yaml"]) == 2
    assert "nope/absent.yaml" in capsys.readouterr().err


def test_unknown_flag_exits_2(out_root, capsys):
    assert cli_main(["simulate", "--frobnicate", "1"]) == 2
    assert "frobnicate" in capsys.readouterr().err


def test_no_subcommand_exits_2(capsys):
    assert cli_main([]) == 2


def test_bad_value_exits_2(out_root):
    assert cli_main(["validate", "--D", "-3"]) == 2


def test_validate_prints_hash(out_root, capsys):
    assert cli_main(["validate", "--N", "64"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["config"]["N"] == 64 and len(d["config_hash"]) == 16


def test_simulate_writes_outputs(out_root, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("experiment: simulate\nN: 64\nhorizon: 0.2\nmodel: closure\n"
                   "ic: {kind: twin_unequal, cB: 1.0}\n")
    assert cli_main(["simulate", "--config", str(cfg), "--out", "run1", "--gamma", "8"]) == 0
    assert (out_root / "run1" / "trajectory.csv").is_file()
    row = json.loads((out_root / "run1" / "result.json").read_text())
    assert row["params"]["gamma"] == 8.0


def test_simulate_rejects_sweep_config(out_root):
    assert cli_main(["simulate", "--experiment", "decay_sweep"]) == 2


def test_energy_table(out_root, capsys):
    assert cli_main(["energy-table", "--ansatz", "single", "--eps", "0:0.5:0.25", "--out", "t.csv"]) == 0
    text = capsys.readouterr().out
    lines = text.strip().splitlines()
    assert lines[0] == "eps,closed_form,quadrature,rel_diff"
    assert len(lines) == 4
    assert all(float(ln.split(",")[3]) < 0.01 for ln in lines[1:])
    assert (out_root / "t.csv").read_text() == text


def test_energy_table_bad_ansatz(out_root):
    assert cli_main(["energy-table", "--ansatz", "triple"]) == 2


def test_rc_bisect_bad_bracket_exits_1(out_root, capsys):
    code = cli_main(["rc-bisect", "--horizon", "0.3", "--bracket", "[0.0, 0.01]"])
    assert code == 1
    assert "low" in capsys.readouterr().err
