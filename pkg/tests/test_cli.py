import json

import pytest

from eignet.cli import main


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_validate_exit_codes(tmp_path, capsys):
    good = write(tmp_path, "k.json", {"variant": "svd", "q": 2, "bound": 6, "beta": 1})
    assert main(["validate", "--kernel", good, "--max-lambda", "4", "--test-points", "8"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True
    bad = write(tmp_path, "bad.json", {"variant": "svd", "q": 2})
    assert main(["validate", "--kernel", bad]) == 3
    assert main(["validate", "--kernel", str(tmp_path / "missing.json")]) == 3


def test_synth_writes_a_loadable_network(tmp_path, capsys):
    cfg = {
        "kernel": {"variant": "svd", "q": 2, "bound": 8, "beta": 1},
        "target": {"type": "sobolev", "gamma": 1.5, "seed": 3, "levels": 3},
        "gamma": 1.5,
        "M": 64,
        "seed": 1,
        "n": 2,
    }
    out = tmp_path / "net.json"
    assert main(["synth", "--config", write(tmp_path, "s.json", cfg), "--out", str(out)]) == 0
    net = json.loads(out.read_text())
    assert len(net["atoms"]) == 64
    assert json.loads(capsys.readouterr().out)["n"] == 2


def test_rates_writes_csv_and_summary(tmp_path):
    cfg = {
        "name": "tiny",
        "kernel": {"variant": "svd", "q": 2, "bound": 8, "beta": 0},
        "gamma": 1.5,
        "M": [32, 128, 512],
        "seeds": [0, 1],
    }
    code = main(["rates", "--config", write(tmp_path, "r.json", cfg), "--out", str(tmp_path / "res")])
    assert code in (0, 2)
    header = (tmp_path / "res" / "tiny.csv").read_text().splitlines()[0]
    assert header == "M,seed,operator,p,error_total,error_sigma,error_sampling,n,tv,regime"
    summary = json.loads((tmp_path / "res" / "tiny.json").read_text())
    assert summary["passed"] == (code == 0)


def test_bad_thread_setting_is_a_config_error(tmp_path, monkeypatch):
    monkeypatch.setenv("EIGNET_THREADS", "many")
    cfg = {"kernel": {"variant": "svd", "q": 2, "bound": 8}, "gamma": 1.5, "M": [32, 128, 512], "seeds": [0]}
    assert main(["rates", "--config", write(tmp_path, "r.json", cfg), "--out", str(tmp_path)]) == 3
