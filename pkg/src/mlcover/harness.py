"""Cross-validation experiments and average-rank comparison of strategies."""
from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from statistics import fmean

import numpy as np

from .cover_core import CoverMatrix
from .dataset_io import MultiLabelDataset, make_folds
from .dd_permute import dd_adjust
from .errors import ValidationError
from .lp_ensemble import fit_base, predict, train_ensemble
from .metrics import HIGHER_IS_BETTER, METRIC_ALIASES, EvalReport, evaluate
from .scp import StrategyConfig, balancor, design

log = logging.getLogger(__name__)

ALL_STRATEGIES = ("random", "inlac", "balco", "balancor", "dd-balancor")
CSV_METRICS = ("hamming_loss", "subset_accuracy", "accuracy", "micro_f1")
MODE_ALIASES = {"rakel": "voting", "rakelpp": "confidence", "voting": "voting", "confidence": "confidence"}


@dataclass
class ExperimentConfig:
    dataset: MultiLabelDataset
    strategies: tuple[str, ...] = ("random", "balancor", "dd-balancor")
    k: int = 3
    r: int = 2
    sigma: int | None = None  # None: size of the unbounded BALANCOR cover
    folds: int = 10
    seed: int = 0  # fold partition seed, shared by every strategy
    matrix_seed: int | None = None  # defaults to seed
    mode: str = "confidence"
    threshold: float | str | None = None
    target_metric: str = "micro_f1"
    tie_break: str = "lowest-index"
    test: MultiLabelDataset | None = None  # train/test split mode when given
    merit_kind: str = "composite"

    def __post_init__(self):
        if self.test is None and self.folds < 2:
            raise ValidationError("folds must be >= 2")
        self.mode = MODE_ALIASES.get(self.mode, self.mode)
        unknown = set(self.strategies) - set(ALL_STRATEGIES)
        if unknown:
            raise ValidationError(f"unknown strategies {sorted(unknown)}")
        if self.test is not None and self.test.m != self.dataset.m:
            raise ValidationError("train and test sets have different label counts")


@dataclass
class FoldResult:
    strategy: str
    fold: int
    report: EvalReport
    test_indices: tuple[int, ...]
    sigma: int
    threshold: float


@dataclass
class CVResult:
    k: int
    sigma: int
    folds: list[FoldResult] = field(default_factory=list)

    def by_strategy(self) -> dict[str, list[FoldResult]]:
        out: dict[str, list[FoldResult]] = defaultdict(list)
        for f in self.folds:
            out[f.strategy].append(f)
        return dict(out)

    def mean(self, strategy: str, metric: str) -> float:
        return fmean(f.report.metric(metric) for f in self.by_strategy()[strategy])


def shared_sigma(m: int, k: int, r: int) -> int:
    return balancor(StrategyConfig(m, k, r)).sigma


def _base_matrix(strategy: str, cfg: ExperimentConfig, sigma: int) -> CoverMatrix:
    seed = cfg.seed if cfg.matrix_seed is None else cfg.matrix_seed
    name = "balancor" if strategy == "dd-balancor" else strategy
    sc = StrategyConfig(cfg.dataset.m, cfg.k, cfg.r, sigma, seed, cfg.tie_break)
    return design(name, sc)


def run_split(matrix: CoverMatrix, strategy: str, train: MultiLabelDataset, test: MultiLabelDataset,
              cfg: ExperimentConfig, fold_seed: int, fit=fit_base) -> tuple[EvalReport, float]:
    if strategy == "dd-balancor":
        seed = cfg.seed if cfg.matrix_seed is None else cfg.matrix_seed
        matrix, _ = dd_adjust(matrix, train, cfg.r, seed=seed * 7919 + fold_seed, kind=cfg.merit_kind)
    model = train_ensemble(matrix, train, cfg.mode, threshold=cfg.threshold, seed=fold_seed,
                           target_metric=cfg.target_metric, fit=fit)
    return evaluate(test.Y, predict(model, test)), model.threshold


def cross_validate(cfg: ExperimentConfig, fit=fit_base) -> CVResult:
    """Evaluate every strategy on the same folds (or the same train/test split).

    Non-data-driven matrices are built once and reused on every fold; the
    DD permutation is recomputed from each training fold alone.
    """
    d = cfg.dataset
    sigma = cfg.sigma if cfg.sigma is not None else shared_sigma(d.m, cfg.k, cfg.r)
    if cfg.test is not None:
        splits = [(None, None)]
    else:
        splits = make_folds(d, cfg.folds, cfg.seed)
    result = CVResult(cfg.k, sigma)
    for strategy in cfg.strategies:
        base = _base_matrix(strategy, cfg, sigma)
        for fold, (train_idx, test_idx) in enumerate(splits):
            if cfg.test is not None:
                train, test, idx = d, cfg.test, tuple(range(len(cfg.test)))
            else:
                train, test, idx = d.subset(train_idx), d.subset(test_idx), tuple(int(i) for i in test_idx)
            report, t = run_split(base, strategy, train, test, cfg, fold_seed=cfg.seed * 100 + fold, fit=fit)
            log.info("%s fold %d: micro-F1 %.4f (t=%.2f)", strategy, fold, report.micro_f1, t)
            result.folds.append(FoldResult(strategy, fold, report, idx, sigma, t))
    return result


def _g6(x: float) -> str:
    return f"{x:.6g}"


def results_csv(result: CVResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "fold", "k", "sigma", *CSV_METRICS])
    for f in result.folds:
        w.writerow([f.strategy, f.fold, result.k, f.sigma, *(_g6(f.report.metric(m)) for m in CSV_METRICS)])
    return buf.getvalue()


@dataclass(frozen=True)
class RankTable:
    metric: str
    strategies: tuple[str, ...]
    average_rank: dict
    per_configuration: dict  # configuration -> {strategy: rank}


def _midranks(values: dict[str, float], higher: bool) -> dict[str, float]:
    ordered = sorted(values, key=lambda s: -values[s] if higher else values[s])
    ranks = {}
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and values[ordered[j + 1]] == values[ordered[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for s in ordered[i:j + 1]:
            ranks[s] = mid
        i = j + 1
    return ranks


def rank_strategies(results: dict, metric: str = "micro_f1") -> RankTable:
    """Average rank per strategy (1 = best) over configurations; ties share midpoint ranks.

    ``results`` maps a configuration key to ``{strategy: metric value}``.
    """
    if not results:
        raise ValidationError("need at least one configuration")
    higher = HIGHER_IS_BETTER[METRIC_ALIASES.get(metric, metric)]
    strategies = tuple(next(iter(results.values())))
    if len(strategies) < 2:
        raise ValidationError("need at least two strategies to rank")
    per = {}
    for key, row in results.items():
        if set(row) != set(strategies):
            raise ValidationError(f"configuration {key!r} does not list the same strategies")
        per[key] = _midranks(row, higher)
    avg = {s: fmean(per[key][s] for key in per) for s in strategies}
    return RankTable(metric, strategies, avg, per)


def configuration_means(csv_texts: dict[str, str], metric: str = "micro_f1") -> dict:
    """Group crossval CSV rows by (source, k, sigma) and average each strategy over folds."""
    col = "accuracy" if METRIC_ALIASES.get(metric, metric) == "example_accuracy" else metric
    acc: dict = defaultdict(lambda: defaultdict(list))
    for source, text in csv_texts.items():
        for row in csv.DictReader(io.StringIO(text)):
            acc[(source, int(row["k"]), int(row["sigma"]))][row["strategy"]].append(float(row[col]))
    return {key: {s: fmean(v) for s, v in rows.items()} for key, rows in acc.items()}


def rank_table_text(table: RankTable) -> str:
    lines = [f"average rank ({table.metric}; 1 = best)"]
    for s in sorted(table.strategies, key=lambda s: table.average_rank[s]):
        lines.append(f"{s}\t{table.average_rank[s]:.4g}")
    return "\n".join(lines) + "\n"


def seed_sweep(cfg: ExperimentConfig, seeds, metric: str = "micro_f1", fit=fit_base) -> dict[str, list[float]]:
    """Fold-mean metric per strategy for each matrix seed (folds stay fixed)."""
    out: dict[str, list[float]] = defaultdict(list)
    for s in seeds:
        res = cross_validate(replace(cfg, matrix_seed=s), fit=fit)
        for strategy in cfg.strategies:
            out[strategy].append(res.mean(strategy, metric))
    return dict(out)


def mean_and_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(len(arr)))
