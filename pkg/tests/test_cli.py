import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from setconv.cli import EXIT_COMPAT, EXIT_DATA, EXIT_OK, EXIT_USAGE, main

FAST = ["--iterations", "40", "--hidden", "8", "--d-out", "8", "--support-size", "16", "--s-post", "200"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def binary_csv(tmp_path):
    path = tmp_path / "bin.csv"
    assert main(["synth", "--classes", "2", "--counts", "180,20", "--dim", "4", "--sep", "5",
                 "--seed", "1", "--out", str(path)]) == EXIT_OK
    return path


@pytest.fixture
def multi_csv(tmp_path):
    path = tmp_path / "multi.csv"
    assert main(["synth", "--counts", "120,40,20", "--dim", "4", "--sep", "7",
                 "--seed", "2", "--out", str(path)]) == EXIT_OK
    return path


def train(tmp_path, data, name="m.json", extra=()):
    out = tmp_path / name
    assert main(["train", "--data", str(data), "--model-out", str(out), *FAST, *extra]) == EXIT_OK
    return out


class TestSynth:
    def test_example(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert main(["synth", "--classes", "2", "--counts", "900,100", "--dim", "16",
                     "--sep", "4", "--seed", "7", "--out", str(out)]) == EXIT_OK
        assert "IR 9.00" in capsys.readouterr().out
        rows = read_csv(out)
        assert len(rows) == 1000 and len(rows[0]) == 17

    def test_deterministic_bytes(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            main(["synth", "--counts", "50,10", "--dim", "3", "--seed", "4", "--out", str(tmp_path / name)])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_missing_counts(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--out", str(tmp_path / "x.csv")])
        assert exc.value.code != 0

    def test_bad_counts(self, tmp_path):
        assert main(["synth", "--counts", "5,a", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE
        assert main(["synth", "--classes", "3", "--counts", "5,5", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


class TestTrain:
    def test_writes_model_and_log(self, tmp_path, binary_csv, capsys):
        model = train(tmp_path, binary_csv)
        assert "final training loss" in capsys.readouterr().out
        doc = json.loads(model.read_text())
        assert doc["kind"] == "binary" and doc["metadata"]["config"]["iterations"] == 40
        log = read_csv(f"{model}.loss.csv")
        assert [int(r["iteration"]) for r in log] == list(range(40))

    def test_zero_iterations(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv, extra=["--iterations", "0"])
        assert json.loads(model.read_text())["heads"][0]["dims"]["d"] == 4
        assert read_csv(f"{model}.loss.csv") == []
        assert main(["eval", "--model", str(model), "--data", str(binary_csv)]) == EXIT_OK

    def test_deterministic(self, tmp_path, binary_csv):
        a = train(tmp_path, binary_csv, "a.json")
        b = train(tmp_path, binary_csv, "b.json")
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.json.loss.csv").read_bytes() == (tmp_path / "b.json.loss.csv").read_bytes()

    def test_binary_mode_rejects_three_classes(self, tmp_path, multi_csv):
        assert main(["train", "--data", str(multi_csv), "--model-out", str(tmp_path / "x.json"),
                     *FAST]) == EXIT_USAGE

    def test_missing_data(self, tmp_path):
        assert main(["train", "--data", str(tmp_path / "none.csv")]) == EXIT_DATA

    def test_ragged_data(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,label\n1,0\n2\n")
        assert main(["train", "--data", str(bad)]) == EXIT_DATA

    def test_env_override(self, tmp_path, binary_csv, monkeypatch):
        monkeypatch.setenv("SETCONV_ITERATIONS", "3")
        out = tmp_path / "e.json"
        args = [a for a in FAST]
        i = args.index("--iterations")
        del args[i:i + 2]
        assert main(["train", "--data", str(binary_csv), "--model-out", str(out), *args]) == EXIT_OK
        assert len(read_csv(f"{out}.loss.csv")) == 3


class TestEval:
    def test_report(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv)
        rep = tmp_path / "r.csv"
        assert main(["eval", "--model", str(model), "--data", str(binary_csv),
                     "--subset", "train", "--report-out", str(rep)]) == EXIT_OK
        rows = read_csv(rep)
        assert [r["class"] for r in rows] == ["0", "1"]
        for r in rows:
            for key in ("spec", "sens", "f1", "g_mean", "auc"):
                assert 0.0 <= float(r[key]) <= 1.0
        assert sum(int(r["support"]) for r in rows) == 140

    def test_test_subset_size(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv)
        rep = tmp_path / "r.csv"
        main(["eval", "--model", str(model), "--data", str(binary_csv), "--report-out", str(rep)])
        assert [int(r["support"]) for r in read_csv(rep)] == [54, 6]

    def test_report_bytes_repeatable(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv)
        for name in ("r1.csv", "r2.csv"):
            main(["eval", "--model", str(model), "--data", str(binary_csv), "--report-out", str(tmp_path / name)])
        assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()

    def test_dimension_mismatch(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv)
        other = tmp_path / "d8.csv"
        main(["synth", "--counts", "30,10", "--dim", "8", "--out", str(other)])
        assert main(["eval", "--model", str(model), "--data", str(other), "--subset", "all"]) == EXIT_COMPAT

    def test_other_file_needs_subset_all(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv)
        other = tmp_path / "o.csv"
        main(["synth", "--counts", "30,10", "--dim", "4", "--seed", "9", "--out", str(other)])
        assert main(["eval", "--model", str(model), "--data", str(other)]) == EXIT_COMPAT
        assert main(["eval", "--model", str(model), "--data", str(other), "--subset", "all"]) == EXIT_OK

    def test_corrupt_model(self, tmp_path, binary_csv):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["eval", "--model", str(bad), "--data", str(binary_csv)]) == EXIT_DATA


class TestPredict:
    def test_ten_rows(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv)
        ten = tmp_path / "ten.csv"
        ten.write_text("".join(binary_csv.read_text().splitlines(keepends=True)[:11]))
        out = tmp_path / "p.csv"
        assert main(["predict", "--model", str(model), "--data", str(ten), "--out", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert len(rows) == 10
        for r in rows:
            assert abs(float(r["score_0"]) + float(r["score_1"]) - 1.0) <= 1e-12
            winner = "1" if float(r["score_1"]) >= float(r["score_0"]) else "0"
            assert r["label"] == winner

    def test_multiclass(self, tmp_path, multi_csv):
        model = train(tmp_path, multi_csv, extra=["--mode", "multiclass"])
        out = tmp_path / "p.csv"
        assert main(["predict", "--model", str(model), "--data", str(multi_csv), "--out", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert len(rows) == 180
        scores = np.array([[float(r[f"score_{c}"]) for c in range(3)] for r in rows])
        labels = np.array([int(r["label"]) for r in rows])
        # argmax is taken over log-odds, which orders heads like the scores
        clear = np.sort(scores, axis=1)[:, -1] < 1.0
        np.testing.assert_array_equal(labels[clear], np.argmax(scores[clear], axis=1))
        rep = tmp_path / "r.csv"
        assert main(["eval", "--model", str(model), "--data", str(multi_csv), "--report-out", str(rep)]) == EXIT_OK
        assert [r["class"] for r in read_csv(rep)] == ["0", "1", "2"]

    def test_unlabelled_input(self, tmp_path, binary_csv):
        model = train(tmp_path, binary_csv)
        feats = tmp_path / "f.csv"
        feats.write_text("x0,x1,x2,x3\n0,0,0,0\n1,1,1,1\n")
        assert main(["predict", "--model", str(model), "--data", str(feats)]) == EXIT_OK


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "setconv", "synth", "--counts", "20,5", "--dim", "2",
                           "--out", str(tmp_path / "m.csv")], capture_output=True, text=True)
    assert proc.returncode == 0 and "IR 4.00" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "setconv", "synth"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
