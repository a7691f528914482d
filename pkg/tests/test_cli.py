import json

import pytest

from heatsing import io
from heatsing.cli import run


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(io.OUTPUT_ENV, str(tmp_path / "env-out"))
    return tmp_path


def manifest(path):
    return json.loads((path / "manifest.json").read_text())


def test_profile_writes_artifacts(tmp_path):
    out = tmp_path / "w"
    assert run(["profile", "--kind", "W", "--q", "3", "--out", str(out)], quiet=True) == 0
    assert (out / "profile.csv").read_text().startswith("r,value\n")
    fit = json.loads((out / "fit.json").read_text())
    assert fit["schema"] == "heatsing.fit/1"
    man = manifest(out)
    assert man["schema"] == io.MANIFEST_SCHEMA and man["status"] == "ok"
    assert man["config"]["kind"] == "W" and "numpy" in man["versions"]


def test_default_output_under_env_root(tmp_path):
    assert run(["kernel", "--q", "3", "--r-power", "2"], quiet=True) == 0
    dirs = list((tmp_path / "env-out").iterdir())
    assert len(dirs) == 1 and dirs[0].name.startswith("kernel-")
    rec = json.loads((dirs[0] / "kernel.json").read_text())
    assert rec["verdict"] == "finite" and rec["q_crit"] == 3.0


def test_solve_rejects_q_at_most_one(tmp_path, capsys):
    out = tmp_path / "bad"
    assert run(["solve", "--q", "1", "--out", str(out)], quiet=True) == 1
    assert "q" in capsys.readouterr().err
    assert manifest(out)["status"] == "error"


def test_usage_errors_exit_one(tmp_path, capsys):
    assert run(["solve", "--no-such-flag"], quiet=True) == 1
    assert run(["nope"], quiet=True) == 1
    assert run(["verify", "--suite", "nope", "--out", str(tmp_path / "v")], quiet=True) == 1
    assert "flat-exact" in capsys.readouterr().err


def test_config_unknown_key_and_malformed_json(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.0, "colour": "red"}))
    assert run(["solve", "--config", str(cfg)], quiet=True) == 1
    err = capsys.readouterr().err
    assert "colour" in err and "alpha" in err
    cfg.write_text('{"alpha": 0.0,\n "q": }')
    assert run(["solve", "--config", str(cfg)], quiet=True) == 1
    assert "line 2" in capsys.readouterr().err


def test_config_values_overridden_by_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"q": 3.0, "r_power": 2.0}))
    out = tmp_path / "k"
    assert run(["kernel", "--config", str(cfg), "--q", "2", "--out", str(out)], quiet=True) == 0
    assert manifest(out)["config"]["q"] == 2.0


def test_solve_is_deterministic(tmp_path):
    argv = ["solve", "--datum", "ball", "--height", "5", "--T", "0.05", "--steps", "20", "--n", "101"]
    assert run(argv + ["--out", str(tmp_path / "a")], quiet=True) == 0
    assert run(argv + ["--out", str(tmp_path / "b")], quiet=True) == 0
    a = (tmp_path / "a" / "solution.csv").read_bytes()
    assert a == (tmp_path / "b" / "solution.csv").read_bytes()
    assert a.startswith(b"t,r,u\n")


def test_verify_single_suite_passes(tmp_path, capsys):
    assert run(["verify", "--suite", "flat-exact", "--out", str(tmp_path / "v")], quiet=True) == 0
    assert "[PASS]  1 flat-exact" in capsys.readouterr().out
    res = json.loads((tmp_path / "v" / "suite-flat-exact.json").read_text())
    assert res["passed"] is True


def test_ko_power_table_and_psi(tmp_path):
    out = tmp_path / "ko"
    assert run(["ko", "--power", "2", "--psi", "1,1", "--out", str(out)], quiet=True) == 0
    rec = json.loads((out / "ko.json").read_text())
    assert rec["verdict"] == "holds" and rec["psi"]["value"] == pytest.approx(1.0)
    table = tmp_path / "h.csv"
    table.write_text("s,h\n" + "".join(f"{s},{s * s}\n" for s in range(0, 101, 5)))
    assert run(["ko", "--table", str(table), "--out", str(tmp_path / "t")], quiet=True) == 0
    rec = json.loads((tmp_path / "t" / "ko.json").read_text())
    assert rec["superadditivity"]["violations"] == 0 and rec["profile"]["kind"] == "table"
    assert run(["ko", "--out", str(tmp_path / "none")], quiet=True) == 1


def test_trace_command(tmp_path):
    out = tmp_path / "tr"
    argv = ["trace", "--caps", "10,100,1000", "--n", "301", "--r-max", "4", "--steps", "100", "--out", str(out)]
    assert run(argv, quiet=True) == 0
    report = json.loads((out / "trace.json").read_text())
    assert report["schema"] == "heatsing.trace/1" and len(report["verdicts"]) == 2
    assert (out / "trajectory-0.csv").exists()


@pytest.mark.parametrize("workers", ["1", "2"])
def test_sweep_aggregates_exit_codes(tmp_path, workers):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"runs": [
        {"command": "kernel", "q": 3.0},
        {"command": "solve", "q": 1.0},
    ]}))
    out = tmp_path / "sw"
    assert run(["sweep", "--config", str(cfg), "--workers", workers, "--out", str(out)], quiet=True) == 1
    table = json.loads((out / "sweep.json").read_text())["runs"]
    assert [r["exit_code"] for r in table] == [0, 1]
    assert (out / "run-000" / "kernel.json").exists()
