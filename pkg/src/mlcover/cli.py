"""Command-line entry point ``mlcover``.

Exit codes: 0 on success, 2 on validation errors, 3 when an enumeration or
search budget is exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds, cover_core, dataset_io, dd_permute, harness, lp_ensemble, metrics, scp
from .errors import BudgetError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET = 0, 2, 3


def _sigma(text: str) -> int | None:
    if text.lower() in ("inf", "infinity", "unbounded"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"sigma must be an integer or 'inf', got {text!r}")
    return value


def _threshold(text: str) -> float | str:
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be a number or 'auto', got {text!r}")


def _labels_last(text: str | None) -> int | None:
    if text is None:
        return None
    prefix, _, n = text.partition(":")
    if prefix != "last" or not n.isdigit():
        raise ValidationError(f"--labels expects last:N, got {text!r}")
    return int(n)


def _load(args, attr: str = "dataset") -> dataset_io.MultiLabelDataset:
    return dataset_io.load_dataset(getattr(args, attr), labels_xml=getattr(args, "labels_xml", None),
                                   labels_last=_labels_last(getattr(args, "labels", None)))


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _dataset_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--dataset", required=required, help="native .jsonl or .arff file")
    p.add_argument("--labels-xml", help="label declaration XML for an ARFF dataset")
    p.add_argument("--labels", help="take the last N attributes as labels (last:N) when no XML exists")


# ----------------------------------------------------------------- commands


def cmd_design(args) -> int:
    cfg = scp.StrategyConfig(args.m, args.k, args.r, args.sigma, args.seed, args.tie_break)
    matrix = scp.design(args.strategy, cfg)
    _write(args.out, cover_core.serialize_matrix(matrix))
    stats = cover_core.cover_stats(matrix, args.r)
    print(f"sigma={matrix.sigma} imbalance={stats.imbalance} r_covered={stats.r_covered}/{stats.r_total}",
          file=sys.stderr)
    return EXIT_OK


def cmd_bounds(args) -> int:
    if args.which == "lemma2":
        b = scp.lemma2_bounds(args.m, args.k, args.r)
        print(f"lower {b.lower:.10g}")
        print(f"upper {b.upper:.10g}")
        if not b.upper_assumption_holds:
            print("note: upper bound derived for m divisible by k; here it does not hold exactly")
        return EXIT_OK
    if args.which == "lemma1":
        rep = bounds.lemma1_pair_coverage_bound(args.m, args.k, args.sigma, exact=args.exact)
        label = "P(all pairs covered) <="
    else:
        rep = bounds.misrepresentation_bound(args.m, args.k, args.sigma, exact=args.exact)
        label = "P(some label unused) >="
    print(f"{label} {rep.bound:.10g}")
    print(f"S1 {rep.s1:.10g}")
    print(f"S2 {rep.s2:.10g}")
    print(f"h {rep.h}")
    if rep.raw_value != rep.bound:
        print(f"unclamped {rep.raw_value:.10g}")
    return EXIT_OK


def cmd_curve(args) -> int:
    points = bounds.coverage_curve(args.m, args.k, args.sigma_max, args.r, args.trials, args.seed)
    _write(args.out, bounds.curve_csv(points))
    return EXIT_OK


def cmd_stats(args) -> int:
    d = _load(args)
    s = dataset_io.dataset_stats(d)
    name = args.name or Path(args.dataset).stem
    print("dataset\tinstances\tnominal\tnumeric\tlabels\tcardinality\tdensity")
    print(f"{name}\t{s.instance_count}\t{s.nominal_count}\t{s.numeric_count}\t{s.label_count}"
          f"\t{s.cardinality:.3f}\t{s.density:.3f}")
    return EXIT_OK


def cmd_permute(args) -> int:
    matrix = cover_core.CoverMatrix.load(args.matrix)
    d = _load(args)
    permuted, result = dd_permute.dd_adjust(matrix, d, args.r, seed=args.seed, kind=args.merit)
    _write(args.out, cover_core.serialize_matrix(permuted))
    print(f"initial merit {result.initial_merit:.6g}")
    print(f"final merit {result.merit:.6g}")
    print(f"iterations {result.iterations}")
    print("permutation " + " ".join(map(str, result.permutation)))
    return EXIT_OK


def cmd_train(args) -> int:
    matrix = cover_core.CoverMatrix.load(args.matrix)
    d = _load(args)
    mode = harness.MODE_ALIASES[args.mode]
    model = lp_ensemble.train_ensemble(matrix, d, mode, threshold=args.threshold, seed=args.seed,
                                       target_metric=args.metric)
    lp_ensemble.save_model(model, args.out)
    print(f"members {len(model.members)} threshold {model.threshold:.2f}")
    return EXIT_OK


def _prediction_csv(model, d) -> str:
    scores = lp_ensemble.score(model, d)
    decisions = scores.decide(model.threshold)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "label", "avg", "decision"])
    for i in range(len(d)):
        for label in range(d.m):
            w.writerow([i, label, f"{scores.avg[i, label]:.6g}", int(decisions[i, label])])
    return buf.getvalue()


def read_prediction_csv(text: str, n: int, m: int) -> np.ndarray:
    out = np.zeros((n, m), dtype=bool)
    for row in csv.DictReader(io.StringIO(text)):
        i, label = int(row["instance"]), int(row["label"])
        if not (0 <= i < n and 0 <= label < m):
            raise ValidationError(f"prediction row ({i}, {label}) outside the dataset's shape ({n}, {m})")
        out[i, label] = row["decision"].strip() == "1"
    return out


def cmd_predict(args) -> int:
    model = lp_ensemble.load_model(args.model)
    d = _load(args)
    _write(args.out, _prediction_csv(model, d))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    d = _load(args)
    if (args.model is None) == (args.predictions is None):
        raise ValidationError("give exactly one of --model or --predictions")
    if args.model is not None:
        pred = lp_ensemble.predict(lp_ensemble.load_model(args.model), d)
    else:
        pred = read_prediction_csv(Path(args.predictions).read_text(encoding="utf-8"), len(d), d.m)
    rep = metrics.evaluate(d.Y, pred, d.m)
    for name in ("hamming_loss", "subset_accuracy", "example_accuracy", "micro_precision", "micro_recall",
                 "micro_f1"):
        print(f"{name}\t{rep.metric(name):.6g}")
    if rep.f1_degenerate:
        print("note: no positive predictions or truths; micro-F1 set to 0")
    return EXIT_OK


def cmd_crossval(args) -> int:
    d = _load(args)
    test = dataset_io.load_dataset(args.test) if args.test else None
    cfg = harness.ExperimentConfig(
        d, strategies=tuple(args.strategies.split(",")), k=args.k, r=args.r, sigma=args.sigma,
        folds=args.folds, seed=args.seed, matrix_seed=args.matrix_seed, mode=args.mode,
        threshold=args.threshold, target_metric=args.metric, tie_break=args.tie_break, test=test,
        merit_kind=args.merit)
    result = harness.cross_validate(cfg)
    _write(args.out, harness.results_csv(result))
    for strategy in cfg.strategies:
        print(f"{strategy}\tmean {args.metric} {result.mean(strategy, args.metric):.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_rank(args) -> int:
    texts = {p: Path(p).read_text(encoding="utf-8") for p in args.results}
    table = harness.rank_strategies(harness.configuration_means(texts, args.metric), args.metric)
    sys.stdout.write(harness.rank_table_text(table))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlcover", description="Cover-matrix design for label-powerset ensembles.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="build a cover matrix")
    p.add_argument("--strategy", required=True, choices=scp.STRATEGIES)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--sigma", type=_sigma, default=None, help="row count, or inf to stop at full coverage")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tie-break", default="lowest-index", choices=scp.TIE_BREAKS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("bounds", help="evaluate the coverage and size bounds")
    bsub = p.add_subparsers(dest="which", required=True)
    for which in ("lemma1", "misrep"):
        q = bsub.add_parser(which)
        q.add_argument("--m", type=int, required=True)
        q.add_argument("--k", type=int, required=True)
        q.add_argument("--sigma", type=int, required=True)
        q.add_argument("--exact", action="store_true", help="evaluate with exact rationals")
        q.set_defaults(func=cmd_bounds)
    q = bsub.add_parser("lemma2")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--r", type=int, default=2)
    q.set_defaults(func=cmd_bounds)

    p = sub.add_parser("curve", help="coverage probability versus sigma")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--sigma-max", type=int, required=True)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("stats", help="dataset summary row")
    _dataset_args(p)
    p.add_argument("--name", help="row name (defaults to the file stem)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("permute", help="data-driven column permutation of a matrix")
    p.add_argument("--matrix", required=True)
    _dataset_args(p)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--merit", default="composite", choices=dd_permute.MERIT_KINDS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_permute)

    p = sub.add_parser("train", help="train a label-powerset ensemble")
    p.add_argument("--matrix", required=True)
    _dataset_args(p)
    p.add_argument("--mode", required=True, choices=sorted(harness.MODE_ALIASES))
    p.add_argument("--threshold", type=_threshold, default=None)
    p.add_argument("--metric", default="micro_f1", help="metric optimised by the threshold search")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="per-label scores and decisions")
    p.add_argument("--model", required=True)
    _dataset_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model or a prediction CSV against a dataset")
    p.add_argument("--model")
    p.add_argument("--predictions")
    _dataset_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("crossval", help="cross-validate several strategies on shared folds")
    _dataset_args(p)
    p.add_argument("--test", help="held-out test set; skips cross-validation")
    p.add_argument("--strategies", default="random,balancor,dd-balancor")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--sigma", type=_sigma, default=None)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--matrix-seed", type=int, default=None)
    p.add_argument("--mode", default="rakelpp", choices=sorted(harness.MODE_ALIASES))
    p.add_argument("--threshold", type=_threshold, default=None)
    p.add_argument("--metric", default="micro_f1")
    p.add_argument("--tie-break", default="lowest-index", choices=scp.TIE_BREAKS)
    p.add_argument("--merit", default="composite", choices=dd_permute.MERIT_KINDS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("rank", help="average ranks from one or more crossval CSVs")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--metric", default="micro_f1")
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
