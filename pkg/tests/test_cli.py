import hashlib
import json
import shutil
import subprocess
import sys

import pytest

from fbmtv.cli import dispatch, dumps, fmt


def _write(path, values, dt=1.0):
    path.write_text("t,value\n" + "".join(f"{i * dt!r},{v!r}\n" for i, v in enumerate(values)))
    return str(path)


def _manifest_ok(out):
    man = json.loads(open(f"{out}.manifest.json").read())
    for entry in man["outputs"]:
        assert hashlib.sha256(open(entry["path"], "rb").read()).hexdigest() == entry["sha256"]
    for key in ("tool", "version", "command", "config", "config_sha256", "seed", "started", "finished"):
        assert key in man
    return man


def test_fmt_and_dumps():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(1 / 3)) == 1 / 3
    text = dumps({"a": [1, 2.5, float("nan")], "b": {"c": True, "d": None}, "e": []})
    assert json.loads(text) == {"a": [1, 2.5, None], "b": {"c": True, "d": None}, "e": []}


def test_simulate_rows(capsys):
    assert dispatch(["simulate", "--hurst", "0.5", "--steps", "16", "--dt", "0.0625", "--seed", "7"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,value" and len(lines) == 17 + 1


def test_simulate_file_is_deterministic(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        args = ["simulate", "--hurst", "0.3", "--steps", "64", "--seed", "5", "--method", "chol", "--out", str(out)]
        assert dispatch(args) == 0
        _manifest_ok(out)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_tv_total_variation(tmp_path, capsys):
    p = _write(tmp_path / "p.csv", [0, 1, 0, 1])
    assert dispatch(["tv", "--input", p, "--c", "0"]) == 0
    assert capsys.readouterr().out.strip() == "3"
    w = tmp_path / "w.csv"
    assert dispatch(["tv", "--input", p, "--c", "0.5", "--kind", "utv", "--witness", str(w)]) == 0
    assert capsys.readouterr().out.strip() == "1"
    assert w.read_text().splitlines() == ["s_index,t_index,payoff", "0,1,0.5", "2,3,0.5"]
    _manifest_ok(w)


def test_crossings_json_and_csv(tmp_path):
    p = _write(tmp_path / "p.csv", [-0.5, 1.5, -0.5, 1.5])
    out = tmp_path / "c.json"
    assert dispatch(["crossings", "--input", p, "--c", "1", "--a", "0", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["strip"] == {"a": 0.0, "u": 2, "d": 1, "n": 3}
    assert rep["k"] == rep["ku"] + rep["kd"]
    _manifest_ok(out)
    csv_out = tmp_path / "c.csv"
    assert dispatch(["crossings", "--input", p, "--c", "1", "--report", "csv", "--out", str(csv_out)]) == 0
    assert csv_out.read_text().splitlines()[0] == "p,lower,u,d,n"


def test_loctime(tmp_path):
    p = _write(tmp_path / "p.csv", [0.0, 1.0])
    out = tmp_path / "l.csv"
    assert dispatch(["loctime", "--input", p, "--hurst", "0.5", "--c", "0.4", "--ckh", "1",
                     "--levels", "-0.5:1:0.25", "--out", str(out)]) == 0
    rows = [r.split(",") for r in out.read_text().splitlines()[1:]]
    assert len(rows) == 7
    dens = {float(a): float(d) for a, d in rows}
    assert dens[0.25] == pytest.approx(0.8) and dens[-0.5] == 0 and dens[1.0] == 0


def test_mc_reports_are_byte_identical(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("h = 0.5\nreplicas = 40\nn_steps = 256\nc_values = [0.5, 0.25]\nseed = 1\n")
    texts = []
    for w in ("1", "2"):
        out = tmp_path / f"r{w}.json"
        assert dispatch(["mc", "mean-tv", "--config", str(cfg), "--workers", w, "--out", str(out)]) == 0
        _manifest_ok(out)
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]
    assert json.loads(texts[0])["seed"] == 1
    out = tmp_path / "s.json"
    assert dispatch(["mc", "mean-tv", "--config", str(cfg), "--seed", "2", "--out", str(out)]) == 0
    assert out.read_bytes() != texts[0]


def test_mc_tail_csv(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("h = 0.5\nreplicas = 2000\nn_steps = 256\nmin_exceedances = 20\n")
    out = tmp_path / "t.json"
    assert dispatch(["mc", "tails", "--config", str(cfg), "--workers", "1", "--out", str(out)]) == 0
    tail = tmp_path / "t.tail.csv"
    assert tail.read_text().splitlines()[0] == "v,p,stderr"
    assert {e["path"] for e in _manifest_ok(out)["outputs"]} == {str(out), str(tail)}


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--hurst", "1.5", "--steps", "8", "--seed", "1"],
        ["simulate", "--hurst", "0.5", "--steps", "8"],
        ["tv", "--input", "/nonexistent.csv", "--c", "1"],
        ["bogus"],
        ["simulate", "--hurst", "0.5", "--steps", "8", "--seed", "1", "--frobnicate"],
        ["loctime", "--input", "x", "--hurst", "0.5", "--c", "1", "--ckh", "1", "--levels", "1:0:0.1"],
    ],
)
def test_invalid_input_exits_1(argv, capsys):
    assert dispatch(argv) == 1
    assert capsys.readouterr().err


def test_invalid_config_exits_1(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("h = 0.5\nunknown_key = 3\n")
    assert dispatch(["mc", "mean-tv", "--config", str(cfg)]) == 1
    cfg.write_text("h = [\n")
    assert dispatch(["mc", "mean-tv", "--config", str(cfg)]) == 1


def test_invariant_violation_exits_2(monkeypatch, tmp_path, capsys):
    from fbmtv import cli
    from fbmtv.errors import InvariantViolation

    def broken(*args, **kwargs):
        raise InvariantViolation("TTV mismatch", seed=123, replica=4)

    monkeypatch.setattr(cli, "ttv", broken)
    p = _write(tmp_path / "p.csv", [0, 1])
    assert dispatch(["tv", "--input", p, "--c", "0.5"]) == 2
    assert "123" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("fbmtv") is None, reason="console script not installed")
def test_console_script(tmp_path):
    r = subprocess.run(["fbmtv", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("fbmtv ")
    r = subprocess.run([sys.executable, "-m", "fbmtv.cli", "tv"], capture_output=True, text=True)
    assert r.returncode == 1
