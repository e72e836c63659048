import csv
import json

import pytest

from idks.cli import main

SMALL = ["--synth", "two-cluster", "--n", "1500", "--window", "256", "--step", "50", "--t", "10"]


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["run", *SMALL, "--out", str(out), *extra])
    return code, out


def test_run_is_byte_identical(tmp_path):
    c1, a = run(tmp_path, "a", "--mode", "idks", "--seed", "7")
    c2, b = run(tmp_path, "b", "--mode", "idks", "--seed", "7")
    assert c1 == c2 == 0
    assert (a / "scores.csv").read_bytes() == (b / "scores.csv").read_bytes()
    c3, c = run(tmp_path, "c", "--mode", "idks", "--seed", "8")
    assert (a / "scores.csv").read_bytes() != (c / "scores.csv").read_bytes()


def test_outputs_and_manifest(tmp_path):
    code, out = run(tmp_path, "o", "--ndjson")
    assert code == 0
    rows = list(csv.DictReader(open(out / "scores.csv")))
    assert len(rows) == 1500
    assert list(rows[0]) == ["stream_index", "normal_score", "label", "scored_at_step"]
    assert [int(r["stream_index"]) for r in rows] == list(range(1500))
    assert len((out / "scores.ndjson").read_text().splitlines()) == 1500
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["outputs"]) == {"scores.csv", "scores.ndjson", "metrics.json"}
    assert man["params"]["psi"] == 4 and man["input_fingerprint"]


def test_replay_reproduces_scores(tmp_path):
    code, out = run(tmp_path, "orig", "--seed", "3", "--shuffle")
    assert code == 0
    replay = tmp_path / "replay"
    assert main(["run", "--replay", str(out / "manifest.json"), "--out", str(replay)]) == 0
    assert (out / "scores.csv").read_bytes() == (replay / "scores.csv").read_bytes()


def test_retrain_and_idks_metrics_share_schema(tmp_path):
    _, a = run(tmp_path, "i", "--mode", "idks")
    _, b = run(tmp_path, "r", "--mode", "retrain")
    ma = json.loads((a / "metrics.json").read_text())
    mb = json.loads((b / "metrics.json").read_text())
    assert set(ma) == set(mb)
    assert ma["mode"] == "incremental" and mb["mode"] == "retrain"


def test_psi_one_is_config_error(tmp_path, capsys):
    code, _ = run(tmp_path, "x", "--psi", "1")
    assert code == 1
    assert "2 <= psi < omega" in capsys.readouterr().err


def test_unknown_flag_is_config_error(capsys):
    assert main(["run", "--bogus"]) == 1


def test_no_command():
    assert main([]) == 1


def test_input_csv(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("".join("%d,%d,%d\n" % (i % 7, i % 5, int(i % 13 == 0)) for i in range(300)))
    assert main(["run", "--input", str(src), "--window", "100", "--step", "50", "--t", "5",
                 "--out", str(tmp_path / "o")]) == 0


def test_bad_csv_is_ingestion_error(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("1,2,0\n1,x,1\n")
    assert main(["run", "--input", str(src), "--out", str(tmp_path / "o")]) == 2


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("IDKS_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", *SMALL]) == 0
    assert (tmp_path / "env" / "scores.csv").exists()


def test_bench_empty_grid(tmp_path):
    assert main(["bench", "--omegas", "", "--out", str(tmp_path)]) == 1
    assert main(["bench", "--modes", "", "--out", str(tmp_path)]) == 1


def test_bench_small_grid(tmp_path):
    assert main(["bench", "--omegas", "128,256", "--modes", "idks,retrain", "--repeats", "2",
                 "--max-updates", "3", "--t", "5", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "bench.csv")))
    assert sum(r["kind"] == "seed" for r in rows) == 8
    assert sum(r["kind"] == "median" for r in rows) == 4


def test_verify_exit_codes(capsys):
    fast = ["--window", "5", "--trials", "2000", "--oracle-n", "400", "--oracle-window", "64"]
    assert main(["verify", *fast]) == 0
    assert main(["verify", *fast, "--sabotage", "newest-only"]) == 4
    assert main(["verify", "--trials", "10"]) == 1
    assert "trials" in capsys.readouterr().err


def test_sweep(tmp_path, capsys):
    assert main(["sweep", *SMALL, "--psis", "4", "--out", str(tmp_path)]) == 0
    assert "argmax_psi=4" in capsys.readouterr().out
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 2


def test_sweep_missing_input(tmp_path):
    assert main(["sweep", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("cmd", ["run", "sweep"])
def test_psi_not_below_window(tmp_path, cmd):
    flag = "--psi" if cmd == "run" else "--psis"
    assert main([cmd, *SMALL, flag, "256", "--out", str(tmp_path)]) == 1
