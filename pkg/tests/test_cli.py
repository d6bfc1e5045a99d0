import csv
import io
import json

import pytest

from toeplab import __version__
from toeplab.cli import run
from toeplab.config import ConfigError, RunConfig


def invoke(capsys, *argv):
    code = run(list(argv))
    return code, capsys.readouterr()


def test_dyadic_stats(capsys, oracle):
    code, out = invoke(capsys, "dyadic", "stats", "--theta0", "default", "--G", "12", "-q")
    assert code == 0
    doc = json.loads(out.out)
    assert doc["rho"] == pytest.approx(8 / 9, abs=1e-12)
    assert doc["alpha"] == pytest.approx(oracle["alpha_G12"], abs=1e-12)
    assert {"config_hash", "G", "G_q", "version"} <= doc.keys()
    assert doc["version"] == __version__ and doc["G"] == 12


def test_weights_char_bp(capsys):
    code, out = invoke(capsys, "weights", "char", "--kind", "bp", "--p", "2", "--weight", "power:b=0.5", "-q")
    assert code == 0
    assert json.loads(out.out)["value"] == pytest.approx(4 / 3, abs=1e-12)


def test_berezin_csv(capsys, oracle):
    code, out = invoke(capsys, "op", "berezin", "--points", "0.7071067811865476", "--csv", "-q")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert len(rows) == 1 and rows[0]["G_q"] == "10"
    assert float(rows[0]["re"]) == pytest.approx(oracle["berezin_modsq_half"], abs=1e-9)


def test_op_apply(capsys):
    code, out = invoke(capsys, "op", "apply", "--symbol", "power:e=2", "--function", "monomial:0",
                       "--points", "0;0.5j", "-q")
    assert code == 0
    values = json.loads(out.out)["values"]
    assert [v["re"] for v in values] == pytest.approx([0.5, 0.5], abs=1e-9)


def test_verify_single_check(capsys, tmp_path):
    out_path = tmp_path / "report.json"
    code, _ = invoke(capsys, "verify", "structure", "--out", str(out_path), "-q")
    assert code == 0
    rows = json.loads(out_path.read_text())
    assert {r["name"] for r in rows} >= {"structure.alpha", "structure.rho"}
    assert all(r["passed"] and "config_hash" in r for r in rows)


def test_output_is_idempotent(capsys):
    argv = ["weights", "char", "--kind", "reg", "--weight", "power:b=0.3", "-q"]
    assert invoke(capsys, *argv)[1].out == invoke(capsys, *argv)[1].out


def test_report_sweep_from_config(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    csv_path = tmp_path / "sweep.csv"
    cfg.write_text(json.dumps({"b_values": [0.25, 0.5], "symbols": ["one"], "p_values": [2.0],
                               "csv": str(csv_path)}))
    code, out = invoke(capsys, "report", "sweep", "--config", str(cfg), "-q")
    assert code == 0
    rows = json.loads(out.out)
    assert [r["b"] for r in rows] == [0.25, 0.5]
    assert rows[1]["B_2"] == pytest.approx(4 / 3)
    assert rows[1]["rh_bound"] >= rows[1]["RH_r"]
    assert len(list(csv.DictReader(csv_path.open()))) == 2


@pytest.mark.parametrize("argv", [["bogus"], ["weights", "char"], ["op", "apply", "--points", "abc", "-q"],
                                  ["op", "apply", "--function", "spline:3", "-q"]])
def test_usage_errors(capsys, argv):
    assert invoke(capsys, *argv)[0] == 2


@pytest.mark.parametrize("content", ['{"G": 0}', '{"colour": 1}', "[1, 2]", "not json",
                                     '{"grid": {"G_q": 8, "bogus": 1}}', '{"b_values": [1.5]}'])
def test_config_errors(capsys, tmp_path, content):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    code, out = invoke(capsys, "dyadic", "stats", "--config", str(cfg), "-q")
    assert code == 3 and "config error" in out.err


def test_config_digest_ignores_output_paths():
    a = RunConfig()
    assert a.digest == RunConfig(out="x.json", csv="y.csv").digest
    assert a.digest != RunConfig(seed=1).digest
    assert RunConfig.from_dict(json.loads(a.to_json())) == a
    with pytest.raises(ConfigError):
        RunConfig(n=2)
