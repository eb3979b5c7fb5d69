"""Label-powerset ensembles over a cover matrix.

Each matrix row becomes one multi-class task whose classes are the label
combinations (restricted to the row) observed in training. Members are
aggregated per label either by votes on the argmax class or by summing
class probabilities; a label is switched on when its average exceeds t.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .cover_core import CoverMatrix, LabelSet, parse_matrix
from .dataset_io import Attribute, MultiLabelDataset, make_folds
from .errors import ParseError, ValidationError
from .metrics import HIGHER_IS_BETTER, METRIC_ALIASES, metric_fn

N_BINS = 10
MODES = ("voting", "confidence")
MODEL_FORMAT = "mlcover-model"


class FeatureEncoder:
    """Maps raw feature rows to small integer codes per attribute.

    Nominal attributes keep their declared categories; numeric ones are cut
    into N_BINS equal-width bins over the training range (out-of-range values
    clamp to the edge bins). The last code of every attribute is "missing".
    """

    def __init__(self, attributes: Sequence[Attribute], lows, highs):
        self.attributes = tuple(attributes)
        self.lows = [float(x) for x in lows]
        self.highs = [float(x) for x in highs]
        self.cards = np.array([len(a.values) + 1 if a.is_nominal else N_BINS + 1 for a in self.attributes],
                              dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.cards)[:-1]]).astype(np.int64)

    @classmethod
    def fit(cls, d: MultiLabelDataset) -> "FeatureEncoder":
        lows, highs = [], []
        for attr, col in zip(d.attributes, d.columns):
            if attr.is_nominal:
                lows.append(0.0)
                highs.append(0.0)
                continue
            ok = col[~np.isnan(col)]
            lows.append(float(ok.min()) if ok.size else 0.0)
            highs.append(float(ok.max()) if ok.size else 0.0)
        return cls(d.attributes, lows, highs)

    def transform(self, d: MultiLabelDataset) -> np.ndarray:
        if d.attributes != self.attributes:
            raise ValidationError("dataset schema does not match the trained model")
        return self._encode(d.columns, len(d))

    def transform_rows(self, rows: Sequence[Sequence]) -> np.ndarray:
        """Encode raw feature rows (values as stored in a dataset) without building one."""
        if any(len(r) != len(self.attributes) for r in rows):
            raise ValidationError(f"feature rows must have {len(self.attributes)} values")
        cols = []
        for a, attr in enumerate(self.attributes):
            if attr.is_nominal:
                index = {v: i for i, v in enumerate(attr.values)}
                try:
                    cols.append(np.array([-1 if r[a] is None else index[r[a]] for r in rows], dtype=np.int64))
                except KeyError as exc:
                    raise ValidationError(f"undeclared value {exc} for attribute {attr.name!r}") from None
            else:
                cols.append(np.array([math.nan if r[a] is None else float(r[a]) for r in rows], dtype=float))
        return self._encode(cols, len(rows))

    def _encode(self, columns, n: int) -> np.ndarray:
        codes = np.empty((n, len(self.attributes)), dtype=np.int64)
        for a, (attr, col) in enumerate(zip(self.attributes, columns)):
            missing_code = self.cards[a] - 1
            if attr.is_nominal:
                codes[:, a] = np.where(col < 0, missing_code, col)
                continue
            lo, hi = self.lows[a], self.highs[a]
            nan = np.isnan(col)
            if hi > lo:
                b = np.floor((np.where(nan, lo, col) - lo) / (hi - lo) * N_BINS)
                b = np.clip(b, 0, N_BINS - 1).astype(np.int64)
            else:
                b = np.zeros(n, dtype=np.int64)
            codes[:, a] = np.where(nan, missing_code, b)
        return codes

    def to_dict(self) -> dict:
        return {"lows": self.lows, "highs": self.highs}


@dataclass
class LpTask:
    labelset: LabelSet
    combos: tuple[tuple[int, ...], ...]  # class id -> labels (global indices) of that class
    y: np.ndarray  # class id per training instance
    codes: np.ndarray
    cards: np.ndarray
    offsets: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.combos)

    def indicator(self) -> np.ndarray:
        """(classes x k) matrix: 1 where the class's combo contains the row label."""
        return combo_indicator(self.combos, self.labelset)


def combo_indicator(combos, labelset: LabelSet) -> np.ndarray:
    pos = {label: j for j, label in enumerate(labelset.members)}
    out = np.zeros((len(combos), len(labelset)), dtype=float)
    for c, combo in enumerate(combos):
        for label in combo:
            out[c, pos[label]] = 1.0
    return out


def lp_transform(d: MultiLabelDataset, labelset: LabelSet, encoder: FeatureEncoder | None = None,
                 codes: np.ndarray | None = None) -> LpTask:
    """Project every instance's labels onto ``labelset``; observed projections become classes."""
    if labelset.m != d.m:
        raise ValidationError(f"labelset over m={labelset.m} labels, dataset has {d.m}")
    if encoder is None:
        encoder = FeatureEncoder.fit(d)
    if codes is None:
        codes = encoder.transform(d)
    proj = d.Y[:, list(labelset.members)]
    patterns, y = np.unique(proj, axis=0, return_inverse=True)
    combos = tuple(tuple(labelset.members[j] for j in np.flatnonzero(p)) for p in patterns)
    return LpTask(labelset, combos, y.reshape(-1).astype(np.int64), codes, encoder.cards, encoder.offsets)


class BaseModel(Protocol):
    n_classes: int

    def predict_proba(self, codes: np.ndarray) -> np.ndarray: ...


@dataclass
class FrequencyModel:
    """Class priors times per-attribute Laplace-smoothed code frequencies."""

    log_prior: np.ndarray  # (C,)
    log_table: np.ndarray  # (C, sum of cards)
    offsets: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.log_prior)

    def predict_proba(self, codes: np.ndarray) -> np.ndarray:
        if self.n_classes == 1:
            return np.ones((len(codes), 1))
        cols = codes + self.offsets  # (n, d)
        scores = self.log_table[:, cols].sum(axis=2).T + self.log_prior  # (n, C)
        scores -= scores.max(axis=1, keepdims=True)
        p = np.exp(scores)
        return p / p.sum(axis=1, keepdims=True)


def fit_base(task: LpTask) -> FrequencyModel:
    C = task.n_classes
    n = len(task.y)
    if n < 1:
        raise ValidationError("cannot fit a model on zero instances")
    class_counts = np.bincount(task.y, minlength=C).astype(float)
    total_codes = int(task.cards.sum())
    counts = np.zeros((C, total_codes))
    if task.codes.shape[1]:
        cols = (task.codes + task.offsets).ravel()
        rows = np.repeat(task.y, task.codes.shape[1])
        np.add.at(counts, (rows, cols), 1.0)
    denom = class_counts[:, None] + np.repeat(task.cards, task.cards).astype(float)[None, :]
    log_table = np.log(counts + 1.0) - np.log(denom)
    return FrequencyModel(np.log(class_counts / n), log_table, task.offsets.copy())


@dataclass
class Member:
    labelset: LabelSet
    combos: tuple[tuple[int, ...], ...]
    model: BaseModel

    def __post_init__(self):
        self._indicator = combo_indicator(self.combos, self.labelset)

    @property
    def indicator(self) -> np.ndarray:
        return self._indicator


@dataclass
class EnsembleModel:
    matrix: CoverMatrix
    encoder: FeatureEncoder
    members: list[Member]
    threshold: float = 0.5
    mode: str = "voting"

    def __post_init__(self):
        if len(self.members) != self.matrix.sigma:
            raise ValidationError("one member per matrix row is required")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        self.votes = np.zeros(self.matrix.m, dtype=np.int64)
        for row in self.matrix.rows:
            self.votes[list(row.members)] += 1


@dataclass
class PredictionVector:
    avg: np.ndarray
    votes: np.ndarray
    sums: np.ndarray
    result: np.ndarray
    uncovered: np.ndarray  # labels no member votes on

    def labels(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.result))


@dataclass
class Scores:
    """Batch aggregation output: per-instance sums and averages, shared vote counts."""

    sums: np.ndarray  # (n, m)
    votes: np.ndarray  # (m,)
    avg: np.ndarray  # (n, m); 0 where votes == 0

    def decide(self, t: float) -> np.ndarray:
        return (self.avg > t) & (self.votes > 0)


def train_ensemble(matrix: CoverMatrix, d: MultiLabelDataset, mode: str = "voting",
                   threshold: float | str | None = None, seed: int = 0, target_metric: str = "micro_f1",
                   fit=fit_base) -> EnsembleModel:
    """One label-powerset member per matrix row, in row order.

    ``threshold=None`` means 0.5 in voting mode and a cross-validated choice in
    confidence mode; ``"auto"`` forces the cross-validated choice.
    """
    if matrix.m != d.m:
        raise ValidationError(f"matrix has m={matrix.m} labels, dataset has {d.m}")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    encoder = FeatureEncoder.fit(d)
    codes = encoder.transform(d)
    members = []
    for row in matrix.rows:
        task = lp_transform(d, row, encoder, codes)
        members.append(Member(row, task.combos, fit(task)))
    if threshold is None:
        threshold = "auto" if mode == "confidence" else 0.5
    if threshold == "auto":
        threshold = select_threshold(matrix, d, mode, target_metric, seed, fit=fit)
    threshold = float(threshold)
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    return EnsembleModel(matrix, encoder, members, threshold, mode)


def score(model: EnsembleModel, d: MultiLabelDataset | np.ndarray, mode: str | None = None) -> Scores:
    """Aggregate member outputs for every instance of ``d`` (or pre-encoded codes)."""
    mode = mode or model.mode
    codes = d if isinstance(d, np.ndarray) else model.encoder.transform(d)
    n = len(codes)
    sums = np.zeros((n, model.matrix.m))
    for member in model.members:
        proba = member.model.predict_proba(codes)
        if mode == "voting":
            onehot = np.zeros_like(proba)
            onehot[np.arange(n), proba.argmax(axis=1)] = 1.0
            proba = onehot
        sums[:, list(member.labelset.members)] += proba @ member.indicator
    votes = model.votes
    avg = np.divide(sums, votes, out=np.zeros_like(sums), where=votes > 0)
    return Scores(sums, votes.copy(), avg)


def predict(model: EnsembleModel, d: MultiLabelDataset, threshold: float | None = None) -> np.ndarray:
    return score(model, d).decide(model.threshold if threshold is None else threshold)


def _classify(model: EnsembleModel, x: Sequence, mode: str) -> PredictionVector:
    s = score(model, model.encoder.transform_rows([tuple(x)]), mode)
    return PredictionVector(s.avg[0], s.votes, s.sums[0], s.decide(model.threshold)[0], s.votes == 0)


def classify_voting(model: EnsembleModel, x: Sequence) -> PredictionVector:
    return _classify(model, x, "voting")


def classify_confidence(model: EnsembleModel, x: Sequence) -> PredictionVector:
    return _classify(model, x, "confidence")


# ---------------------------------------------------------------- threshold selection

COARSE = tuple(range(10, 91, 10))  # thresholds in hundredths
FINE_RADIUS = 5


@dataclass
class ThresholdSelection:
    threshold: float
    fold_thresholds: list[int] = field(default_factory=list)  # hundredths
    fold_scores: list[float] = field(default_factory=list)
    repetitions: int = 0
    inner_sigma: int = 0


def _best(candidates, evaluate, higher: bool) -> tuple[int, float]:
    best_t, best_v = None, None
    for t in candidates:
        v = evaluate(t)
        if best_v is None or (v > best_v if higher else v < best_v):
            best_t, best_v = t, v
    return best_t, best_v


def fold_threshold(scores: Scores, truth: np.ndarray, metric: str) -> tuple[int, float]:
    """Coarse grid 0.1..0.9, then 0.01 steps within +-0.05 of the coarse optimum."""
    fn = metric_fn(metric)
    higher = HIGHER_IS_BETTER[METRIC_ALIASES.get(metric, metric)]

    def evaluate(cents):
        return fn(truth, scores.decide(cents / 100))

    coarse, _ = _best(COARSE, evaluate, higher)
    fine = [t for t in range(coarse - FINE_RADIUS, coarse + FINE_RADIUS + 1) if 1 <= t <= 99]
    return _best(fine, evaluate, higher)


def inner_sigma(sigma: int) -> int:
    return max(1, sigma // 10) if sigma > 100 else sigma


def threshold_search(matrix: CoverMatrix, d: MultiLabelDataset, mode: str = "confidence",
                     target_metric: str = "micro_f1", seed: int = 0, folds: int = 5, max_repeats: int = 5,
                     std_limit: float = 0.01, fit=fit_base) -> ThresholdSelection:
    """Internal cross-validation for the decision threshold.

    Every fold contributes its own best threshold; the answer is their mean.
    Another full CV round is run while the standard error of the fold scores
    stays above ``std_limit``, up to ``max_repeats`` rounds. Matrices with
    more than 100 rows are searched with their first 10% of rows.
    """
    if len(d) < 10:
        warnings.warn(f"only {len(d)} instances; threshold selection falls back to 0.5", stacklevel=2)
        return ThresholdSelection(0.5)
    sub = matrix.prefix(inner_sigma(matrix.sigma))
    picks: list[int] = []
    scores: list[float] = []
    reps = 0
    for rep in range(max_repeats):
        reps += 1
        for train_idx, test_idx in make_folds(d, folds, seed=seed * 1009 + rep):
            train, test = d.subset(train_idx), d.subset(test_idx)
            model = train_ensemble(sub, train, mode, threshold=0.5, fit=fit)
            t, v = fold_threshold(score(model, test), test.Y, target_metric)
            picks.append(t)
            scores.append(v)
        se = float(np.std(scores, ddof=1) / math.sqrt(len(scores)))
        if se <= std_limit:
            break
    return ThresholdSelection(sum(picks) / (100 * len(picks)), picks, scores, reps, sub.sigma)


def select_threshold(matrix: CoverMatrix, d: MultiLabelDataset, mode: str = "confidence",
                     target_metric: str = "micro_f1", seed: int = 0, **kw) -> float:
    return threshold_search(matrix, d, mode, target_metric, seed, **kw).threshold


# ---------------------------------------------------------------- persistence


def model_to_dict(model: EnsembleModel) -> dict:
    members = []
    for mem in model.members:
        if not isinstance(mem.model, FrequencyModel):
            raise ValidationError("only the built-in frequency model can be saved")
        members.append({
            "labelset": list(mem.labelset.members),
            "combos": [list(c) for c in mem.combos],
            "log_prior": mem.model.log_prior.tolist(),
            "log_table": mem.model.log_table.tolist(),
        })
    return {
        "format": MODEL_FORMAT,
        "version": 1,
        "mode": model.mode,
        "threshold": model.threshold,
        "matrix": model.matrix.to_text(),
        "attributes": [{"name": a.name, "kind": a.kind, "values": list(a.values)} for a in model.encoder.attributes],
        "encoder": model.encoder.to_dict(),
        "members": members,
    }


def model_from_dict(obj: dict) -> EnsembleModel:
    if obj.get("format") != MODEL_FORMAT or obj.get("version") != 1:
        raise ParseError(f"not a {MODEL_FORMAT} v1 container")
    matrix = parse_matrix(obj["matrix"])
    attributes = tuple(Attribute(a["name"], a["kind"], tuple(a["values"])) for a in obj["attributes"])
    encoder = FeatureEncoder(attributes, obj["encoder"]["lows"], obj["encoder"]["highs"])
    members = []
    for rec in obj["members"]:
        ls = LabelSet(tuple(rec["labelset"]), matrix.m)
        model = FrequencyModel(np.array(rec["log_prior"], dtype=float),
                               np.array(rec["log_table"], dtype=float).reshape(len(rec["log_prior"]), -1),
                               encoder.offsets.copy())
        members.append(Member(ls, tuple(tuple(c) for c in rec["combos"]), model))
    return EnsembleModel(matrix, encoder, members, float(obj["threshold"]), obj["mode"])


def save_model(model: EnsembleModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), separators=(",", ":")) + "\n", encoding="utf-8")


def load_model(path) -> EnsembleModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
