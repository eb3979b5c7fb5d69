from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlcover.dataset_io import Attribute, MultiLabelDataset
from mlcover.errors import ValidationError
from mlcover.harness import (
    ExperimentConfig, configuration_means, cross_validate, mean_and_se, rank_strategies, rank_table_text,
    results_csv, shared_sigma,
)
from mlcover.synthetic import PlantedConfig, planted_dataset


@dataclass
class WidestCombo:
    index: int

    @property
    def n_classes(self):
        return self.index + 1

    def predict_proba(self, codes):
        out = np.zeros((len(codes), self.n_classes))
        out[:, self.index] = 1.0
        return out


def widest_fit(task):
    """Constant predictor: always the observed class with the most labels."""
    sizes = [len(c) for c in task.combos]
    return WidestCombo(int(np.argmax(sizes))) if task.n_classes > 1 else WidestCombo(0)


def ten_instances():
    sets = [(0,)] * 4 + [(0, 1)] * 3 + [(1,)] * 2 + [()]
    feats = tuple((float(i),) for i in range(10))
    return MultiLabelDataset((Attribute("x", "numeric"),), ("a", "b"), feats, tuple(sets))


def test_constant_stub_gives_hand_computed_metrics():
    cfg = ExperimentConfig(ten_instances(), strategies=("random", "balco"), k=1, r=1, folds=10,
                           mode="rakel", threshold=0.5)
    res = cross_validate(cfg, fit=widest_fit)
    assert res.sigma == 2
    for s in ("random", "balco"):
        # every instance is predicted {0, 1}; one instance per fold
        assert res.mean(s, "hamming_loss") == pytest.approx(0.4)
        assert res.mean(s, "subset_accuracy") == pytest.approx(0.3)
        assert res.mean(s, "accuracy") == pytest.approx(0.6)
        assert res.mean(s, "micro_f1") == pytest.approx(0.7)


def test_strategies_share_folds():
    d = planted_dataset(PlantedConfig(n=100, seed=4))
    cfg = ExperimentConfig(d, strategies=("random", "balancor", "dd-balancor"), folds=10, threshold=0.5)
    res = cross_validate(cfg)
    by = res.by_strategy()
    assert all(len(v) == 10 for v in by.values())
    assert all(len(f.test_indices) == 10 for f in res.folds)
    for fold in range(10):
        assert len({by[s][fold].test_indices for s in by}) == 1
    assert {f.sigma for f in res.folds} == {shared_sigma(8, 3, 2)} == {11}
    text = results_csv(res)
    lines = text.splitlines()
    assert lines[0] == "strategy,fold,k,sigma,hamming_loss,subset_accuracy,accuracy,micro_f1"
    assert len(lines) == 31 and text.endswith("\n") and "\r" not in text


def test_train_test_split_mode():
    d = planted_dataset(PlantedConfig(n=150, seed=5))
    train, test = d.subset(range(100)), d.subset(range(100, 150))
    res = cross_validate(ExperimentConfig(train, strategies=("balancor",), test=test, threshold=0.5))
    assert len(res.folds) == 1 and len(res.folds[0].test_indices) == 50


def test_config_validation():
    d = ten_instances()
    with pytest.raises(ValidationError):
        ExperimentConfig(d, folds=1)
    with pytest.raises(ValidationError):
        ExperimentConfig(d, strategies=("nope",))
    assert ExperimentConfig(d, mode="rakelpp").mode == "confidence"


def test_rank_examples():
    results = {
        "c1": {"A": 0.9, "B": 0.8},
        "c2": {"A": 0.7, "B": 0.6},
        "c3": {"A": 0.5, "B": 0.4},
        "c4": {"A": 0.5, "B": 0.5},
    }
    table = rank_strategies(results, "micro_f1")
    assert table.average_rank == {"A": 1.125, "B": 1.875}
    flat = rank_strategies({"c": {"A": 1, "B": 1, "C": 1}})
    assert set(flat.average_rank.values()) == {2.0}
    hl = rank_strategies({"c": {"A": 0.1, "B": 0.2}}, "hamming_loss")
    assert hl.average_rank == {"A": 1, "B": 2}
    assert rank_table_text(table).splitlines()[1].startswith("A\t")


def test_rank_needs_two_strategies():
    with pytest.raises(ValidationError):
        rank_strategies({"c": {"A": 1.0}})


@given(st.dictionaries(st.text(min_size=1, max_size=3),
                       st.lists(st.sampled_from([0.1, 0.2, 0.3, 0.4]), min_size=4, max_size=4), min_size=1))
def test_rank_rows_sum(rows):
    results = {key: dict(zip("ABCD", vals)) for key, vals in rows.items()}
    table = rank_strategies(results)
    for ranks in table.per_configuration.values():
        assert sum(ranks.values()) == 10
        assert all(1 <= r <= 4 for r in ranks.values())


def test_configuration_means_from_csv():
    csv_a = "strategy,fold,k,sigma,hamming_loss,subset_accuracy,accuracy,micro_f1\n" \
            "x,0,3,11,0.1,0.5,0.6,0.7\nx,1,3,11,0.3,0.5,0.6,0.5\ny,0,3,11,0.2,0.4,0.5,0.6\ny,1,3,11,0.2,0.4,0.5,0.8\n"
    means = configuration_means({"a": csv_a}, "micro_f1")
    assert means == {("a", 3, 11): {"x": pytest.approx(0.6), "y": pytest.approx(0.7)}}
    assert configuration_means({"a": csv_a}, "accuracy")[("a", 3, 11)]["x"] == pytest.approx(0.6)


def test_mean_and_se():
    m, se = mean_and_se([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1 / np.sqrt(3))
