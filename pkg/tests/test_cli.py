import csv
import io

import pytest

from mlcover.cli import main
from mlcover.cover_core import CoverMatrix, cover_stats
from mlcover.dataset_io import serialize_native
from mlcover.synthetic import PlantedConfig, planted_dataset


@pytest.fixture
def planted(tmp_path):
    path = tmp_path / "planted.jsonl"
    path.write_text(serialize_native(planted_dataset(PlantedConfig(n=120, seed=2))))
    return path


def test_design_writes_labelcover(tmp_path, fixtures):
    out = tmp_path / "m.labelcover"
    assert main(["design", "--strategy", "inlac", "--m", "4", "--k", "3", "--r", "2", "--sigma", "inf",
                 "--out", str(out)]) == 0
    assert out.read_bytes() == (fixtures / "inlac_4_3_2.labelcover").read_bytes()


def test_bounds_commands(capsys):
    assert main(["bounds", "lemma2", "--m", "6", "--k", "3", "--r", "2"]) == 0
    assert capsys.readouterr().out.splitlines()[:2] == ["lower 5", "upper 11"]
    assert main(["bounds", "misrep", "--m", "100", "--k", "3", "--sigma", "100"]) == 0
    value = float(capsys.readouterr().out.splitlines()[0].split()[-1])
    assert 0.86 <= value <= 0.87
    assert main(["bounds", "lemma1", "--m", "4", "--k", "2", "--sigma", "6", "--exact"]) == 0
    assert "h 2" in capsys.readouterr().out


def test_curve_csv(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["curve", "--m", "6", "--k", "3", "--sigma-max", "5", "--trials", "500", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [int(r["sigma"]) for r in rows] == [1, 2, 3, 4, 5]


def test_stats(capsys, fixtures):
    assert main(["stats", "--dataset", str(fixtures / "tiny.arff"), "--labels-xml", str(fixtures / "tiny.xml")]) == 0
    header, row = capsys.readouterr().out.splitlines()
    assert header.split("\t")[-2:] == ["cardinality", "density"]
    assert row.split("\t") == ["tiny", "4", "1", "2", "5", "2.000", "0.400"]
    assert main(["stats", "--dataset", str(fixtures / "tiny.arff"), "--labels", "last:5"]) == 0


def test_train_predict_evaluate_permute(tmp_path, planted, capsys):
    mat = tmp_path / "bal.labelcover"
    assert main(["design", "--strategy", "balancor", "--m", "8", "--k", "3", "--sigma", "inf", "--out", str(mat)]) == 0
    perm = tmp_path / "dd.labelcover"
    assert main(["permute", "--matrix", str(mat), "--dataset", str(planted), "--r", "2", "--seed", "1",
                 "--out", str(perm)]) == 0
    out = capsys.readouterr().out
    assert "initial merit" in out and "final merit" in out and "iterations 2000" in out
    assert cover_stats(CoverMatrix.load(perm), 2).complete

    model = tmp_path / "model.json"
    assert main(["train", "--matrix", str(perm), "--dataset", str(planted), "--mode", "rakelpp",
                 "--threshold", "auto", "--seed", "0", "--out", str(model)]) == 0
    preds = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--dataset", str(planted), "--out", str(preds)]) == 0
    text = preds.read_text()
    assert text.splitlines()[0] == "instance,label,avg,decision"
    assert len(text.splitlines()) == 1 + 120 * 8
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model), "--dataset", str(planted)]) == 0
    from_model = capsys.readouterr().out
    assert main(["evaluate", "--predictions", str(preds), "--dataset", str(planted)]) == 0
    assert capsys.readouterr().out == from_model


def test_crossval_and_rank(tmp_path, planted, capsys):
    out = tmp_path / "cv.csv"
    assert main(["crossval", "--dataset", str(planted), "--strategies", "random,balancor", "--folds", "3",
                 "--threshold", "0.5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "strategy,fold,k,sigma,hamming_loss,subset_accuracy,accuracy,micro_f1"
    assert len(lines) == 7
    capsys.readouterr()
    assert main(["rank", "--results", str(out), "--metric", "hamming_loss"]) == 0
    assert capsys.readouterr().out.startswith("average rank (hamming_loss")


def test_exit_codes(tmp_path, capsys):
    assert main(["design", "--strategy", "balco", "--m", "4", "--k", "5", "--sigma", "2"]) == 2
    assert main(["design", "--strategy", "random", "--m", "4", "--k", "3", "--sigma", "inf"]) == 2
    assert main(["design", "--strategy", "inlac", "--m", "40", "--k", "20", "--sigma", "3"]) == 3
    bad = tmp_path / "bad.labelcover"
    bad.write_text("labelcover 1\nm=2 k=1 sigma=1 r=0 strategy=x seed=0\n11\n")
    assert main(["permute", "--matrix", str(bad), "--dataset", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["design", "--strategy", "nope", "--m", "4", "--k", "3"]) == 2
    assert "line 3" in capsys.readouterr().err
