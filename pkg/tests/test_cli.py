"""Command-line interface: exit codes, file formats, reproducibility."""

import json

import numpy as np
import pytest

from hemlr.cli import main
from hemlr.sigmoid_poly import fit_ls, sigmoid

HEADER = "iter,precision_train,precision_test,lnL2,lnL_softmax"


def run(*args):
    return main(list(args))


@pytest.fixture()
def train_csv(tmp_path):
    path = tmp_path / "train.csv"
    assert run("synth", "--seed", "1", "--n", "40", "--d", "5", "--c", "3",
               "--out", str(path)) == 0
    return path


def test_synth_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert run("synth", "--seed", "1", "--n", "20", "--d", "4", "--c", "2",
               "--out", str(a)) == 0
    assert run("synth", "--seed", "1", "--n", "20", "--d", "4", "--c", "2",
               "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_synth_rejects_single_class(tmp_path):
    assert run("synth", "--seed", "1", "--n", "10", "--d", "3", "--c", "1",
               "--out", str(tmp_path / "x.csv")) == 2


def test_fit_sigmoid_prints_json(capsys):
    assert run("fit-sigmoid") == 0
    doc = json.loads(capsys.readouterr().out)
    assert list(doc.keys()) == ["domain", "coeffs"]
    assert doc["domain"] == [-8.0, 8.0]
    assert len(doc["coeffs"]) == 4
    assert abs(doc["coeffs"][0] - 0.5) < 1e-9


def test_fit_sigmoid_zero_weights_rejected():
    assert run("fit-sigmoid", "--lambda0", "0", "--lambda1", "0") == 2


def test_fit_sigmoid_degree11_reduces_to_ls(capsys):
    assert run("fit-sigmoid", "--degree", "11", "--lambda1", "0") == 0
    doc = json.loads(capsys.readouterr().out)
    base = fit_ls(sigmoid, 11, (-8.0, 8.0))
    np.testing.assert_allclose(doc["coeffs"], base.coeffs, atol=1e-10)


def test_train_writes_outputs(tmp_path, train_csv):
    out = tmp_path / "run"
    assert run("train", "--train", str(train_csv), "--iters", "5",
               "--out", str(out)) == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 6
    assert lines[1].split(",")[0] == "1"
    model = json.loads((out / "model.json").read_text())
    assert list(model.keys()) == ["c", "d", "w"]
    assert model["c"] == 3 and model["d"] == 5
    assert len(model["w"]) == 3 and len(model["w"][0]) == 6


def test_train_zero_iters_zero_model(tmp_path, train_csv):
    out = tmp_path / "run0"
    assert run("train", "--train", str(train_csv), "--iters", "0",
               "--out", str(out)) == 0
    model = json.loads((out / "model.json").read_text())
    assert all(v == 0.0 for row in model["w"] for v in row)


def test_train_missing_file(tmp_path):
    assert run("train", "--train", str(tmp_path / "nope.csv"),
               "--out", str(tmp_path / "o")) == 1


def test_train_malformed_file(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n")
    assert run("train", "--train", str(bad), "--out", str(tmp_path / "o")) == 1


def test_train_bit_reproducible(tmp_path, train_csv):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        assert run("train", "--train", str(train_csv), "--iters", "20",
                   "--out", str(out)) == 0
    assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()
    assert (out1 / "model.json").read_bytes() == (out2 / "model.json").read_bytes()


def test_train_precision_improves(tmp_path, train_csv):
    out = tmp_path / "trend"
    assert run("train", "--train", str(train_csv), "--iters", "100",
               "--optimizer", "sigmoid-nag-qg", "--out", str(out)) == 0
    rows = (out / "metrics.csv").read_text().splitlines()[1:]
    first = float(rows[0].split(",")[1])
    last = float(rows[-1].split(",")[1])
    assert last >= first
    assert last >= 0.9


def test_train_with_test_split(tmp_path, train_csv):
    test_csv = tmp_path / "test.csv"
    assert run("synth", "--seed", "2", "--n", "15", "--d", "5", "--c", "3",
               "--out", str(test_csv)) == 0
    out = tmp_path / "tt"
    assert run("train", "--train", str(train_csv), "--test", str(test_csv),
               "--iters", "3", "--out", str(out)) == 0
    row = (out / "metrics.csv").read_text().splitlines()[1].split(",")
    assert 0.0 <= float(row[2]) <= 1.0


def test_train_encrypted_writes_trace(tmp_path, train_csv):
    out = tmp_path / "enc"
    assert run("train-encrypted", "--train", str(train_csv), "--iters", "2",
               "--logn", "8", "--out", str(out)) == 0
    trace = json.loads((out / "trace.json").read_text())
    assert list(trace.keys()) == ["iterations", "per_op_counts",
                                  "depth_per_iteration", "peak_payload_count"]
    assert trace["iterations"] == 2
    assert trace["per_op_counts"]["Bootstrap"] == 0
    assert trace["depth_per_iteration"] == [11, 11]
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == HEADER and len(lines) == 2
    assert lines[1].split(",")[0] == "2"
    model = json.loads((out / "model.json").read_text())
    assert model["c"] == 3 and model["d"] == 5


def test_train_encrypted_budget_exit(tmp_path, train_csv):
    assert run("train-encrypted", "--train", str(train_csv), "--iters", "3",
               "--logn", "8", "--policy", "never",
               "--out", str(tmp_path / "e3")) == 3


def test_train_encrypted_bootstrap_policy(tmp_path, train_csv):
    out = tmp_path / "eb"
    assert run("train-encrypted", "--train", str(train_csv), "--iters", "3",
               "--logn", "8", "--policy", "on-exhaustion",
               "--out", str(out)) == 0
    trace = json.loads((out / "trace.json").read_text())
    assert trace["per_op_counts"]["Bootstrap"] >= 1


def test_train_encrypted_rejects_other_optimizers(tmp_path, train_csv):
    assert run("train-encrypted", "--train", str(train_csv),
               "--optimizer", "raw-nag", "--logn", "8",
               "--out", str(tmp_path / "x")) == 2
    assert run("train-encrypted", "--train", str(train_csv),
               "--iters", "0", "--logn", "8",
               "--out", str(tmp_path / "y")) == 2


def test_train_encrypted_capacity_exit(tmp_path):
    wide = tmp_path / "wide.csv"
    assert run("synth", "--seed", "1", "--n", "8", "--d", "200", "--c", "2",
               "--out", str(wide)) == 0
    assert run("train-encrypted", "--train", str(wide), "--logn", "8",
               "--out", str(tmp_path / "w")) == 1


def test_unknown_flag_is_config_error(train_csv, tmp_path):
    assert run("train", "--train", str(train_csv), "--badflag",
               "--out", str(tmp_path / "o")) == 2
    assert run("nosuchcommand") == 2


def test_train_encrypted_reproducible(tmp_path, train_csv):
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    for out in (out1, out2):
        assert run("train-encrypted", "--train", str(train_csv),
                   "--iters", "2", "--logn", "8", "--out", str(out)) == 0
    for name in ("metrics.csv", "model.json", "trace.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
