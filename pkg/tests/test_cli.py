import csv
import io
import json

import pytest

from fiqsim.cli import run


@pytest.fixture
def cli(capsys):
    def call(*argv):
        code = run([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return call


def make(cli, tmp_path, spec, name="q.json"):
    path = tmp_path / name
    code, _, _ = cli("make", spec, "--out", path)
    assert code == 0
    return path


def test_make_fiq(cli, tmp_path):
    doc = json.loads(make(cli, tmp_path, "fiq:prefix=1011,window=3/10;1/4,clock=2").read_text())
    assert (doc["kind"], doc["prefix"], doc["window"], doc["clock"]) == ("fiq", "1011", [["3", "10"], ["1", "4"]], 2)
    assert doc["meta"]["config"]["spec"].startswith("fiq:")
    assert "version" in doc["meta"]["config"]


def test_make_rational_reports_period(cli):
    code, out, err = cli("make", "rational:1/5")
    doc = json.loads(out)
    assert code == 0 and (doc["preperiod"], doc["period"]) == (0, 4)
    assert doc["digits"].startswith("00110011")
    assert err.startswith("config: ")


def test_make_rejects_certain_window(cli):
    code, _, err = cli("make", "fiq:window=1/2;1")
    assert code == 1 and "window must exclude certain" in err


def test_make_bad_grammar(cli):
    assert cli("make", "fiq:prefix=12")[0] == 2
    assert cli("make", "decimal:0.5")[0] == 2


def test_evolve_shift_csv(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:prefix=10")
    out = tmp_path / "traj.csv"
    code, _, _ = cli("evolve", q, "--map", "shift:1", "--steps", 2, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["emitted_bits"] for r in rows] == ["", "1", "0"]
    assert [r["N"] for r in rows] == ["2", "1", "0"]
    meta = json.loads((tmp_path / "traj.csv.meta.json").read_text())
    assert meta["engine"] == "none" and meta["final"]["clock"] == 2
    assert meta["randomness"]["counter"] == 0


def test_evolve_rational_json(cli, tmp_path):
    q = make(cli, tmp_path, "rational:11/16")
    code, out, _ = cli("evolve", q, "--steps", 4, "--format", "json")
    rows = json.loads(out)
    assert code == 0 and "".join(r["emitted_bits"] for r in rows) == "1011"


def test_evolve_is_reproducible(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:window=1/3;2/3")
    args = ("evolve", q, "--steps", 12, "--engine", "spontaneous:1/2", "--seed", 44)
    assert cli(*args)[1] == cli(*args)[1]


def test_evolve_state_out(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:prefix=01,window=1/3")
    state = tmp_path / "state.json"
    code, _, _ = cli("evolve", q, "--map", "rotation:1/4", "--steps", 1, "--state-out", state)
    doc = json.loads(state.read_text())
    assert code == 0 and doc["prefix"] == "10" and doc["window"] == [["1", "3"]]


def test_evolve_truncated_beyond_cutoff(cli, tmp_path):
    q = make(cli, tmp_path, "truncated:101:3")
    code, _, err = cli("evolve", q, "--steps", 4)
    assert code == 1 and "cutoff" in err


def test_evolve_non_dyadic_rotation_of_fiq(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:prefix=01")
    assert cli("evolve", q, "--map", "rotation:1/3")[0] == 2


def test_measure(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:prefix=1")
    out = tmp_path / "m.json"
    code, reading, _ = cli("measure", q, "--resolution", 4, "--seed", 3, "--out", out)
    reading = reading.strip()
    doc = json.loads(out.read_text())
    assert code == 0 and len(reading) == 4 and reading[0] == "1"
    assert doc["prefix"].startswith(reading)
    assert doc["meta"]["randomness"]["end"]["counter"] == 3
    # measuring the result again reads the same digits and draws nothing
    code, again, _ = cli("measure", out, "--resolution", 4, "--seed", 3)
    assert again.strip() == reading


def test_measure_counter_resume(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:")
    _, full, _ = cli("measure", q, "--resolution", 8, "--seed", 5)
    # every fair digit costs one bit, so resuming at bit 3 reproduces digits 4..
    _, tail, _ = cli("measure", q, "--resolution", 5, "--seed", 5, "--counter", 3)
    assert full.strip()[3:] == tail.strip()


def test_measure_bad_resolution(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:")
    assert cli("measure", q, "--resolution", 0)[0] == 2


def test_validate_ok_and_invalid(cli, tmp_path):
    good = make(cli, tmp_path, "fiq:prefix=10,window=3/10")
    code, out, _ = cli("validate", good)
    assert code == 0 and json.loads(out)["ok"] is True

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"prefix": "10", "window": [["0", "1"]], "clock": 0}))
    code, out, _ = cli("validate", bad)
    assert code == 1
    assert "window must exclude certain propensities" in {v["name"] for v in json.loads(out)["violations"]}


def test_validate_unreadable(cli, tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    assert cli("validate", path)[0] == 2
    assert cli("validate", tmp_path / "missing.json")[0] == 2


def test_round_trip(cli, tmp_path):
    q = make(cli, tmp_path, "fiq:prefix=110,window=1/3;5/7")
    assert cli("validate", q)[0] == 0
    state = tmp_path / "after.json"
    assert cli("evolve", q, "--steps", 5, "--engine", "measurement:3", "--state-out", state)[0] == 0
    assert cli("validate", state)[0] == 0


def test_experiment_writes_outputs(cli, tmp_path):
    code, _, err = cli("experiment", "--name", "truncation", "--out", tmp_path / "run")
    assert code == 0
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert summary["statistics"]["lost_positions"] == [4]
    assert (tmp_path / "run" / "results.csv").exists()
    assert "config: " in err


def test_experiment_failed_check_exit_code(cli, tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({
        "name": "emergence",
        "seed": 1,
        "params": {"n_values": [1], "R": 20, "depth": 8},
        "tolerances": {"variance_rel_tol": 0.0},
    }))
    code, _, err = cli("experiment", "--config", config)
    assert code == 3 and "FAIL" in err


def test_experiment_unknown_key(cli, tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"name": "truncation", "bogus": 1}))
    assert cli("experiment", "--config", config)[0] == 2


def test_usage_errors(cli):
    assert cli()[0] == 2
    assert cli("evolve")[0] == 2
    assert cli("frobnicate")[0] == 2
