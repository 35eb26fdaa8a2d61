import json
import subprocess
import sys

import pytest

from gibbsrare import cli, samplers

CONFIG = """\
experiment = "clt"
seed = 5
M = 200
n = 3

[model]
name = "bernoulli"
p1 = 0.7
d = 2
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(CONFIG)
    return path


def test_help_exits_zero(capsys):
    assert cli.main(["run", "--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "gibbsrare", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify" in out.stdout


def test_no_command_is_usage_error():
    assert cli.main([]) == 1


def test_run_writes_outputs(config, tmp_path):
    out = tmp_path / "res"
    assert cli.main(["run", str(config), "--out", str(out), "--quiet"]) in (0, 2)
    payload = json.loads((out / "clt.json").read_text())
    assert payload["config"]["M"] == 200
    assert payload["config_hash"] and payload["version"]
    assert "timestamp" not in json.dumps(payload)
    assert (out / "clt.csv").exists() and (out / "clt.txt").exists()


def test_run_is_deterministic(config, tmp_path):
    blobs = []
    for w in (1, 3):
        out = tmp_path / f"w{w}"
        cli.main(["run", str(config), "--out", str(out), "--workers", str(w), "--quiet"])
        blobs.append((out / "clt.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_negative_m_rejected_without_outputs(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(CONFIG.replace("M = 200", "M = -4"))
    out = tmp_path / "never"
    assert cli.main(["run", str(bad), "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "bad.toml:3: M:" in err
    assert not out.exists()


def test_unknown_key_line_anchored(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(CONFIG + "\n[tolerances]\nsupgap = 0.1\n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "bad.toml:12: tolerances.supgap" in capsys.readouterr().err


def test_toml_syntax_error(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("experiment = \nM = 3\n")
    assert cli.main(["run", str(bad)]) == 1
    assert "line 1" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.toml")]) == 1


def test_overrides(config):
    cfg = cli.load_config(config, ["M=50", "model.p1=0.6", 'statistic="surprisal"'])
    assert cfg["M"] == 50 and cfg["model"]["p1"] == 0.6
    with pytest.raises(cli.ConfigError):
        cli.load_config(config, ["M"])


def test_output_env(config, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "envout"))
    cli.main(["run", str(config), "--quiet"])
    assert (tmp_path / "envout" / "clt.json").exists()


def test_budget_exceeded_exit_one(tmp_path):
    cfg = tmp_path / "big.toml"
    cfg.write_text(CONFIG.replace('"clt"', '"entropy"').replace("n = 3", "n = [7]"))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_verify_unknown_suite(capsys):
    assert cli.main(["verify", "nonsense"]) == 1
    assert "unknown suite" in capsys.readouterr().err


def test_bad_workers():
    assert cli.main(["verify", "oracle", "--workers", "0"]) == 1


def test_sample_and_oracle(capsys):
    assert cli.main(["sample", "--model", '{"name": "bernoulli", "p1": 0.5}', "--L", "3"]) == 0
    assert capsys.readouterr().out.startswith("2 2 2\n")
    assert cli.main(["oracle", "--model", '{"name": "bernoulli", "p1": 0.5}', "--pattern", "[[1,0],[0,1]]"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "k,prob"
    assert cli.main(["sample", "--model", "{not json"]) == 1


def test_dobrushin_report(capsys):
    assert cli.main(["dobrushin", "--model", '{"name": "ising", "beta": 0.2}']) == 0
    assert "holds" in capsys.readouterr().out


@pytest.mark.slow
def test_verify_oracle_catches_wrong_glauber_kernel(monkeypatch, capsys):
    real = samplers.heat_bath_setup

    def tampered(U, L):
        setup = real(U, L)
        setup.tables = setup.tables * 1.5  # beta 0.2 -> 0.3
        return setup

    monkeypatch.setattr(samplers, "heat_bath_setup", tampered)
    assert cli.main(["verify", "oracle", "--quiet"]) == 2
    table = capsys.readouterr().out
    assert "Glauber TV" in table and "FAIL" in table
