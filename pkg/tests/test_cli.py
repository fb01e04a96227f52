import subprocess
import sys

import pytest

from dolphinsonar.cli import dispatch


def run(*argv):
    return dispatch([str(a) for a in argv])


@pytest.fixture
def pair(tmp_path):
    a, b = tmp_path / "a.ech", tmp_path / "b.ech"
    assert run("synth", "--eq4", "--a", 1, "--d", 160, "--jitter", 0.2, "--count", 40,
               "--seed", 7, "--out", a) == 0
    assert run("synth", "--eq4", "--a", 1, "--d", 60, "--jitter", 0.05, "--count", 40,
               "--seed", 8, "--out", b, "--label", "near") == 0
    return a, b


def test_inspect_prints_features(pair, capsys):
    assert run("inspect", pair[0], "--echo", 0) == 0
    out = capsys.readouterr()
    rows = [line.split(",") for line in out.out.strip().splitlines()[1:]]
    assert [r[0] for r in rows].count("MaPS") == 16
    assert [r[0] for r in rows].count("MiPS") == 19
    assert sum(float(r[2]) for r in rows if r[0] == "MaPS") == pytest.approx(1.0, abs=1e-9)
    assert "MaPS sum = 1.000000000000" in out.err


def test_inspect_out_of_range_echo(pair):
    assert run("inspect", pair[0], "--echo", 40) == 2


def test_discriminate_prints_verdict(pair, capsys):
    assert run("discriminate", *pair, "--N", 20, "--M", 10, "--n", 10, "--seed", 1) == 0
    assert capsys.readouterr().out.startswith("DISTINCT at")


def test_train_then_identify(pair, tmp_path, capsys):
    db = tmp_path / "db.json"
    assert run("train", pair[1], "--db", db, "--N", 20, "--M", 10, "--n", 10, "--seed", 1) == 0
    assert run("identify", pair[1], "--db", db, "--strict") == 0
    assert capsys.readouterr().out.strip() == "IDENTIFIED near at MaPS"
    assert run("identify", pair[0], "--db", db, "--strict") == 1
    assert run("identify", pair[0], "--db", db) == 0
    # same name again is a domain error
    assert run("train", pair[1], "--db", db, "--N", 20, "--M", 10, "--n", 10, "--seed", 1) == 1


def test_training_needs_enough_echoes(pair, tmp_path):
    assert run("train", pair[1], "--db", tmp_path / "db.json", "--N", 100, "--seed", 1) == 1


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run("synth", "--bogus") == 2
    assert "usage:" in capsys.readouterr().err
    assert run("synth", "--d", 100) == 2  # no seed
    assert run("synth", "--seed", 1) == 2  # no delay
    assert run("synth", "--d", 250, "--seed", 1) == 2
    assert run("inspect", tmp_path / "missing.ech") == 2
    bad = tmp_path / "bad.ech"
    bad.write_bytes(b"nonsense")
    assert run("inspect", bad) == 2
    assert run("frobnicate") == 2


def test_synth_to_stdout_is_csv(capsys):
    assert run("synth", "--eq5", "--a", 0.1, "--d1", 100, "--d2", 107, "--count", 2,
               "--seed", 3) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("sample_interval_us,1.0")
    assert len(lines) == 3 and len(lines[1].split(",")) == 200


def test_exp_dlt_writes_table_and_plot(tmp_path):
    out, plot = tmp_path / "dlt.csv", tmp_path / "dlt.svg"
    code = run("exp-dlt", "--deltas", "30", "--N", 20, "--M", 10, "--n", 10, "--step", 2,
               "--seed", 0, "--out", out, "--plot", plot)
    assert code in (0, 1)
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,feature_used" and lines[1].startswith("30.0,")
    assert (code == 1) == ("NotReached" in lines[1])
    assert plot.read_text().startswith("<svg")


def test_exp_iso_reads_star_overlay(tmp_path):
    stars = tmp_path / "stars.csv"
    stars.write_text("# dolphin points\n5,-35\n100,-27\n")
    plot = tmp_path / "iso.svg"
    run("exp-iso", "--deltas", "100", "--a-grid", "0.003,0.06", "--N", 20, "--M", 10,
        "--n", 10, "--seed", 0, "--out", tmp_path / "iso.csv", "--plot", plot, "--stars", stars)
    assert plot.read_text().count(">*</text>") == 2
    assert run("exp-iso", "--deltas", "100", "--a-grid", "0.5", "--seed", 0) == 2


def test_match_from_files(tmp_path, pair, capsys):
    assert run("match", "--db-files", *pair, "--probe-files", *pair,
               "--N", 20, "--M", 10, "--n", 10, "--seed", 0) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "true,a,near,Unknown,Indistinguishable"
    assert lines[1:] == ["a,1,0,0,0", "near,0,1,0,0"]


def test_module_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "dolphinsonar", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "exp-dlt" in proc.stdout
