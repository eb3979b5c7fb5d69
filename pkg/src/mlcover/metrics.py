"""Example-based and micro-averaged multi-label measures.

Inputs are either boolean indicator matrices of shape (n, m) or sequences of
label subsets (iterables of label indices); subsets need ``m`` to be known.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def as_indicator(sets, m: int | None = None) -> np.ndarray:
    if isinstance(sets, np.ndarray):
        return sets.astype(bool, copy=False)
    sets = [tuple(s) for s in sets]
    if m is None:
        m = 1 + max((max(s) for s in sets if s), default=-1)
    out = np.zeros((len(sets), m), dtype=bool)
    for i, s in enumerate(sets):
        out[i, list(s)] = True
    return out


def _pair(truth, predictions, m=None) -> tuple[np.ndarray, np.ndarray]:
    if len(truth) != len(predictions):
        raise ValidationError(f"truth has {len(truth)} instances, predictions {len(predictions)}")
    if m is None and not isinstance(truth, np.ndarray):
        t = [tuple(s) for s in truth]
        p = [tuple(s) for s in predictions]
        m = 1 + max((max(s) for s in t + p if s), default=0)
    Y = as_indicator(truth, m)
    H = as_indicator(predictions, m)
    if Y.shape != H.shape:
        raise ValidationError("truth and predictions disagree on the label count")
    return Y, H


def hamming_loss(truth, predictions, m: int | None = None) -> float:
    Y, H = _pair(truth, predictions, m)
    if m is not None and Y.shape[1] != m:
        raise ValidationError("label count mismatch")
    return float((Y != H).sum(axis=1).mean() / Y.shape[1])


def subset_accuracy(truth, predictions, m: int | None = None) -> float:
    Y, H = _pair(truth, predictions, m)
    return float((Y == H).all(axis=1).mean())


def example_accuracy(truth, predictions, m: int | None = None) -> float:
    """Mean Jaccard similarity; an instance with both sets empty scores 1."""
    Y, H = _pair(truth, predictions, m)
    inter = (Y & H).sum(axis=1)
    union = (Y | H).sum(axis=1)
    per = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    return float(per.mean())


@dataclass(frozen=True)
class MicroScores:
    precision: float
    recall: float
    f1: float
    tp: tuple[int, ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]
    degenerate: bool  # precision + recall == 0; f1 reported as 0


def micro_scores(truth, predictions, m: int | None = None) -> MicroScores:
    Y, H = _pair(truth, predictions, m)
    tp = (Y & H).sum(axis=0)
    fp = (~Y & H).sum(axis=0)
    fn = (Y & ~H).sum(axis=0)
    TP, FP, FN = int(tp.sum()), int(fp.sum()), int(fn.sum())
    precision = TP / (TP + FP) if TP + FP else 0.0
    recall = TP / (TP + FN) if TP + FN else 0.0
    degenerate = precision + recall == 0
    f1 = 0.0 if degenerate else 2 * precision * recall / (precision + recall)
    return MicroScores(precision, recall, f1, tuple(map(int, tp)), tuple(map(int, fp)), tuple(map(int, fn)),
                       degenerate)


def micro_f1(truth, predictions, m: int | None = None) -> float:
    return micro_scores(truth, predictions, m).f1


@dataclass(frozen=True)
class EvalReport:
    hamming_loss: float
    subset_accuracy: float
    example_accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    tp: tuple[int, ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]
    f1_degenerate: bool = False

    def metric(self, name: str) -> float:
        return getattr(self, METRIC_ALIASES.get(name, name))


METRIC_ALIASES = {"accuracy": "example_accuracy", "f1": "micro_f1"}
HIGHER_IS_BETTER = {"hamming_loss": False, "subset_accuracy": True, "example_accuracy": True,
                    "accuracy": True, "micro_f1": True, "micro_precision": True, "micro_recall": True}


def evaluate(truth, predictions, m: int | None = None) -> EvalReport:
    Y, H = _pair(truth, predictions, m)
    micro = micro_scores(Y, H)
    return EvalReport(hamming_loss(Y, H), subset_accuracy(Y, H), example_accuracy(Y, H), micro.precision,
                      micro.recall, micro.f1, micro.tp, micro.fp, micro.fn, micro.degenerate)


def metric_fn(name: str):
    name = METRIC_ALIASES.get(name, name)
    table = {"hamming_loss": hamming_loss, "subset_accuracy": subset_accuracy,
             "example_accuracy": example_accuracy, "micro_f1": micro_f1}
    if name not in table:
        raise ValidationError(f"unknown metric {name!r}")
    return table[name]
