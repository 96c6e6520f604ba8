import hashlib
import json
import math
import subprocess
import sys

import pytest

from forensics.cli import dumps, run


@pytest.fixture(scope="module")
def null_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("null")
    assert run(["simulate", "--preset", "null", "--seed", "7", "--out", str(d)]) == 0
    return d


def report(path):
    return json.loads((path / "report.json").read_text())


def digest_tree(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir()) if p.is_file()}


def test_simulate_outputs(null_dir):
    names = {p.name for p in null_dir.iterdir()}
    assert {"machines.csv", "precincts.csv", "polls.csv", "audit.csv", "ground_truth.csv",
            "report.json"} <= names
    rep = report(null_dir)
    assert rep["schema_version"] == "1"
    assert rep["run_config"]["seed"] == 7


def test_fraud_test_null(null_dir, tmp_path):
    assert run(["fraud-test", "--data", str(null_dir), "--out", str(tmp_path)]) == 0
    rep = report(tmp_path)
    assert rep["fraud"]["verdict"] == "no_fraud_not_rejected"
    assert rep["fraud"]["n_precincts"] == 342
    assert set(rep["input_digests"]) == {"machines.csv", "precincts.csv", "polls.csv", "audit.csv"}


def test_audit_test_byte_identical(null_dir, tmp_path):
    argv = ["audit-test", "--data", str(null_dir), "--out", str(tmp_path), "--replicates", "200",
            "--sample-size", "200", "--seed", "7"]
    assert run(argv) == 0
    first = (tmp_path / "report.json").read_bytes()
    boot = (tmp_path / "bootstrap_t.csv").read_bytes()
    assert run(argv) == 0
    assert (tmp_path / "report.json").read_bytes() == first
    assert (tmp_path / "bootstrap_t.csv").read_bytes() == boot
    rep = json.loads(first)
    assert rep["audit"]["bootstrap"]["replicates"] == 200
    assert boot.decode().splitlines()[0] == "replicate,t"


def test_run_config_reproduces(null_dir, tmp_path):
    assert run(["full-report", "--data", str(null_dir), "--out", str(tmp_path), "--seed", "3",
                "--replicates", "100"]) == 0
    cfg = report(tmp_path)["run_config"]
    argv = [cfg["command"]]
    for k, v in cfg.items():
        if k == "command" or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        argv += [flag] if v is True else [flag, repr(v) if isinstance(v, float) else str(v)]
    first = (tmp_path / "report.json").read_bytes()
    assert run(argv) == 0
    assert (tmp_path / "report.json").read_bytes() == first


def test_full_report_sections(null_dir, tmp_path):
    assert run(["full-report", "--data", str(null_dir), "--out", str(tmp_path), "--seed", "1",
                "--replicates", "100"]) == 0
    rep = report(tmp_path)
    assert {"comparison", "repeats", "dispersion", "fraud", "audit", "validation"} <= set(rep)
    for name in ("dispersion_hist.csv", "bootstrap_t.csv", "poll_scatter.csv"):
        assert (tmp_path / name).exists()
    hist = (tmp_path / "dispersion_hist.csv").read_text().splitlines()
    assert hist[0] == "bin_left,bin_right,count,reference_density"
    assert sum(int(r.split(",")[2]) for r in hist[1:]) == rep["dispersion"]["n_machines"]
    scatter = (tmp_path / "poll_scatter.csv").read_text().splitlines()
    assert scatter[0] == "precinct_id,official_share,poll_share"
    assert len(scatter) - 1 == rep["comparison"]["n_polled"]


def test_inputs_not_mutated(null_dir, tmp_path):
    before = digest_tree(null_dir)
    run(["full-report", "--data", str(null_dir), "--out", str(tmp_path), "--seed", "1", "--replicates", "100"])
    assert digest_tree(null_dir) == before


def test_caps_disperse_more_than_null(tmp_path):
    fractions = {}
    for name in ("caps", "null"):
        data, out = tmp_path / name, tmp_path / f"{name}-r"
        assert run(["simulate", "--preset", name, "--seed", "0", "--out", str(data)]) == 0
        assert run(["diagnose", "--data", str(data), "--out", str(out)]) == 0
        fractions[name] = report(out)["dispersion"]["fraction_above_2sd"]
    assert fractions["caps"] >= 2 * fractions["null"]


def test_seed_required(null_dir, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run(["audit-test", "--data", str(null_dir), "--out", str(tmp_path)])
    assert exc.value.code == 2
    assert "--seed" in capsys.readouterr().err


def test_unknown_flag_exits_2(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "forensics.cli", "diagnose", "--data", ".",
                           "--out", str(tmp_path), "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2


def test_unreadable_input_exits_1(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "forensics.cli", "fraud-test", "--data",
                           str(tmp_path / "missing"), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "not a directory" in proc.stderr


def test_strict_escalates(tmp_path):
    d = tmp_path / "d"
    d.mkdir()
    (d / "precincts.csv").write_text(
        "precinct_id,yes_votes,signatures,registered_at_reafirmazo,new_voters,non_voters\n"
        "A,500,10,100,10,20\n")
    assert run(["ingest-check", "--data", str(d), "--out", str(tmp_path / "o")]) == 0
    rep = report(tmp_path / "o")
    assert rep["validation"]["rules"] == {"yes exceeds electorate": 1, "yes exceeds votes cast": 1}
    assert run(["ingest-check", "--data", str(d), "--out", str(tmp_path / "s"), "--strict"]) == 1


def test_data_error_exit_code(tmp_path):
    d = tmp_path / "d"
    d.mkdir()
    (d / "precincts.csv").write_text(
        "precinct_id,yes_votes,signatures,registered_at_reafirmazo,new_voters,non_voters\n"
        "A,5,10,100,10,20\n")
    # no exit polls at all
    assert run(["compare-polls", "--data", str(d), "--out", str(tmp_path / "o")]) == 1


def test_json_number_format():
    text = dumps({"a": 0.1, "b": float("nan"), "c": [1, 2.5e-300], "d": True, "e": None})
    parsed = json.loads(text)
    assert '"a": 0.10000000000000001' in text
    assert parsed["b"] is None and parsed["a"] == 0.1 and parsed["c"][1] == 2.5e-300
    for x in (math.pi, 1 / 3, 1e22, -7.25e-11):
        assert json.loads(dumps(x)) == x
