"""One test per acceptance criterion; each records a PASS/FAIL line with its runtime."""
import itertools
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from mlcover.bounds import (
    exact_coverage_fraction, lemma1_pair_coverage_bound, misrepresentation_bound, monte_carlo_coverage,
    pair_miss_probability,
)
from mlcover.cover_core import CoverMatrix, cover_stats, imbalance, label_frequency, parse_matrix, serialize_matrix
from mlcover.dataset_io import parse_native, serialize_native
from mlcover.dd_permute import (
    ContingencyCube, DependencyWeight, DependencyWeights, anneal_permutation, chi_square, exhaustive_best_merit,
    iteration_budget,
)
from mlcover.harness import ExperimentConfig, mean_and_se, seed_sweep
from mlcover.metrics import example_accuracy, hamming_loss, micro_scores, subset_accuracy
from mlcover.scp import (
    ScpInstance, StrategyConfig, balanced_cover_size, balancor, balco, exact_zero_one_ip, greedy_wscp, inlac,
    lemma2_bounds, random_rakel_matrix,
)
from mlcover.synthetic import PlantedConfig, planted_dataset

from conftest import ACCEPTANCE_LINES, FIXTURES


@contextmanager
def criterion(number, title, limit_s):
    """Times the body; the body yields its verdict through ``box['ok']`` and ``box['detail']``."""
    box = {"ok": False, "detail": ""}
    start = time.perf_counter()
    try:
        yield box
    finally:
        elapsed = time.perf_counter() - start
        fast = elapsed < limit_s
        ok = box["ok"] and fast
        detail = box["detail"] + ("" if fast else f"; too slow (limit {limit_s:g} s)")
        line = f"[{'PASS' if ok else 'FAIL'}] AC{number:>2} {title}: {detail} ({elapsed:.2f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
    assert box["ok"], box["detail"]
    assert fast, f"criterion {number} exceeded {limit_s} s ({elapsed:.1f} s)"


def subset_costs(instance):
    """Union mask and cost of every selection, built one subset at a time (2**n table)."""
    index = {e: i for i, e in enumerate(instance.universe)}
    masks = [sum(1 << index[e] for e in s) for s in instance.subsets]
    union = np.zeros(1, dtype=np.int64)
    cost = np.zeros(1)
    for mask, w in zip(masks, instance.weights):
        union = np.concatenate([union, union | mask])
        cost = np.concatenate([cost, cost + w])
    return union, cost, (1 << len(index)) - 1


def brute_force_min(instance):
    union, cost, full = subset_costs(instance)
    return float(cost[union == full].min())


def random_instance(seed):
    rng = np.random.default_rng(10_000 + seed)
    u = int(rng.integers(4, 13))
    n = int(rng.integers(4, 17))
    subsets = [set(int(x) for x in rng.choice(u, size=int(rng.integers(1, u // 2 + 2)), replace=False))
               for _ in range(n)]
    for e in set(range(u)) - set().union(*subsets):
        subsets[int(rng.integers(n))].add(e)
    weights = [int(w) for w in rng.integers(1, 4, size=n)]
    return ScpInstance.build(range(u), subsets, weights)


def exact_chi_square(cells):
    n = Fraction(int(cells.sum()))
    margins = [[Fraction(int(cells.sum(axis=tuple(a for a in range(3) if a != axis))[v])) for v in range(2)]
               for axis in range(3)]
    total = Fraction(0)
    for i, j, k in itertools.product(range(2), repeat=3):
        e = margins[0][i] * margins[1][j] * margins[2][k] / n**2
        total += (e - int(cells[i, j, k])) ** 2 / e
    return total


def test_ac01_misrepresentation_worked_bound():
    with criterion(1, "misrepresentation bound m=100 k=3 sigma=100", 1.0) as box:
        value = misrepresentation_bound(100, 3, 100).bound
        box["ok"] = 0.86 <= value <= 0.87
        box["detail"] = f"bound {value:.5f}, required [0.86, 0.87]"


def test_ac02_pair_miss_identity():
    with criterion(2, "per-pair miss probability identity, 2<=k<m<=30", 1.0) as box:
        worst = max(abs(pair_miss_probability(m, k) - pair_miss_probability(m, k, closed_form=True))
                    for m in range(3, 31) for k in range(2, m))
        box["ok"] = worst <= 1e-12
        box["detail"] = f"max |difference| {float(worst):.1e}"


def test_ac03_lemma1_soundness():
    with criterion(3, "Lemma-1 style bound dominates exact coverage probability", 120.0) as box:
        violations = []
        checked = 0
        for m in range(2, 7):
            for k in range(2, min(3, m) + 1):
                for sigma in range(1, 9):
                    exact = exact_coverage_fraction(m, k, sigma, 2)
                    bound = lemma1_pair_coverage_bound(m, k, sigma).bound
                    checked += 1
                    if float(exact) > bound + 1e-12:
                        violations.append((m, k, sigma))
        spot = exact_coverage_fraction(4, 2, 6, 2)
        mc = monte_carlo_coverage(4, 2, 6, 2, trials=10**5, seed=0)
        z = abs(mc.probability - float(spot)) / mc.std_error
        box["ok"] = not violations and spot == Fraction(720, 46656) and z <= 3
        box["detail"] = (f"{checked} grid points, {len(violations)} violations; exact(4,2,6)={spot}; "
                         f"MC {mc.probability:.5f} at {z:.2f} SE")


def test_ac04_small_cover_tables():
    with criterion(4, "INLAC on 4 labels and size bounds on 6 labels", 1.0) as box:
        four = inlac(StrategyConfig(4, 3, 2))
        stats = cover_stats(four, 2)
        lo, hi = lemma2_bounds(6, 3, 2)
        six = inlac(StrategyConfig(6, 3, 2))
        box["ok"] = four.sigma == 3 and stats.r_covered == 6 == stats.r_total and (lo, hi) == (5, 11) \
            and lo <= six.sigma <= hi and cover_stats(six, 2).complete
        box["detail"] = f"4 labels: {four.sigma} rows, {stats.r_covered}/6 pairs; bounds ({lo:g}, {hi:g}); " \
                        f"6 labels: {six.sigma} rows"


def test_ac05_balco_balance():
    with criterion(5, "BALCO imbalance on 20 random (m, k)", 10.0) as box:
        rng = np.random.default_rng(2024)
        bad = []
        for _ in range(20):
            m = int(rng.integers(2, 16))
            k = int(rng.integers(1, m + 1))
            sigma = balanced_cover_size(m, k)
            mat = balco(StrategyConfig(m, k, 1, sigma=sigma))
            steps = [imbalance(label_frequency(mat.prefix(n))) for n in range(1, sigma + 1)]
            if max(steps) > 1 or steps[-1] != 0:
                bad.append((m, k))
        box["ok"] = not bad
        box["detail"] = f"{20 - len(bad)}/20 configurations balanced" + (f"; failures {bad}" if bad else "")


def test_ac06_exact_versus_greedy():
    with criterion(6, "exact 0-1 IP vs enumeration and greedy", 60.0) as box:
        mismatches, greedy_below, equal = 0, 0, 0
        for seed in range(100):
            inst = random_instance(seed)
            exact = exact_zero_one_ip(inst).cost
            greedy = greedy_wscp(inst).cost
            mismatches += exact != brute_force_min(inst)
            greedy_below += greedy < exact
            equal += greedy == exact
        crafted = ScpInstance.build(range(1, 7), [{1, 2, 3}, {4, 5, 6}, {2, 3, 4, 5}])
        g, e = greedy_wscp(crafted).cost, exact_zero_one_ip(crafted).cost
        box["ok"] = mismatches == 0 and greedy_below == 0 and equal >= 1 and (g, e) == (3, 2)
        box["detail"] = f"{mismatches} exact mismatches, greedy optimal on {equal}/100, crafted {g:g} > {e:g}"


def test_ac07_chi_square_oracle():
    with criterion(7, "chi-square vs exact rational oracle", 1.0) as box:
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(50):
            cells = rng.integers(1, 60, size=(2, 2, 2))
            worst = max(worst, abs(chi_square(ContingencyCube(cells)) - float(exact_chi_square(cells))))
        flat = chi_square(ContingencyCube(np.full((2, 2, 2), 9)))
        box["ok"] = worst <= 1e-9 and flat == 0
        box["detail"] = f"max error {worst:.1e} over 50 cubes; equal cube gives {flat}"


def toy_matrices():
    return [
        inlac(StrategyConfig(4, 3, 2)),
        balancor(StrategyConfig(5, 3, 2)),
        balancor(StrategyConfig(6, 3, 2)),
        random_rakel_matrix(StrategyConfig(6, 3, 2, sigma=5, seed=1)),
    ]


def random_weights(m, rng, count):
    trip = list(itertools.combinations(range(m), 3))
    picks = rng.choice(len(trip), size=count, replace=False)
    return DependencyWeights(3, {trip[i]: DependencyWeight(float(rng.uniform(1, 50)), int(rng.integers(5, 40)))
                                 for i in sorted(picks)})


def test_ac08_annealing_toy_optimality():
    with criterion(8, "annealing reaches the m! optimum (one weighted triplet, m<=6)", 60.0) as box:
        mats = toy_matrices()
        hits = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            mat = mats[seed % len(mats)]
            w = random_weights(mat.m, rng, 1)
            hits += anneal_permutation(mat, w, seed=seed).merit == exhaustive_best_merit(mat, w)
        budgets = iteration_budget(100, 100), iteration_budget(6, 7)
        # for information: the same check with four weighted triplets on six labels
        dense = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            mat = mats[2]
            w = random_weights(6, rng, 4)
            dense += anneal_permutation(mat, w, seed=seed).merit == exhaustive_best_merit(mat, w)
        box["ok"] = hits >= 45 and budgets == (4176, 2000)
        box["detail"] = f"{hits}/50 optimal (need 45); budgets {budgets}; " \
                        f"informational: {dense}/50 with four weighted triplets"


def test_ac09_metric_fixtures():
    with criterion(9, "metric fixtures", 1.0) as box:
        s = micro_scores([{0, 1}, {2}], [{0, 1, 2}, set()], 3)
        empty = micro_scores([set()], [set()], 3)
        perfect = micro_scores([{0}, {1, 2}], [{0}, {1, 2}], 3)
        checks = [
            hamming_loss([{0, 1}], [{1, 2}], 4) == 0.5,
            hamming_loss([{0, 1}], [{0, 1}], 4) == 0,
            hamming_loss([{0, 1, 2}], [set()], 3) == 1.0,
            subset_accuracy([{0}, {1}], [{0}, {1}], 2) == 1,
            subset_accuracy([{0}, {1}], [{0, 1}, set()], 2) == 0,
            subset_accuracy([{0}, {1}, {2}, {0, 2}], [{0}, {1}, {2}, {0}], 3) == 0.75,
            Fraction(example_accuracy([{0, 1}], [{1, 2}], 3)).limit_denominator(1000) == Fraction(1, 3),
            example_accuracy([set()], [set()], 3) == 1,
            example_accuracy([{0, 2}], [{0, 2}], 3) == 1,
            (sum(s.tp), sum(s.fp), sum(s.fn)) == (2, 1, 1),
            Fraction(s.precision).limit_denominator(1000) == Fraction(Fraction(s.recall).limit_denominator(1000))
            == Fraction(2, 3),
            abs(s.f1 - 2 / 3) < 1e-15,
            empty.f1 == 0 and empty.degenerate,
            perfect.precision == perfect.recall == perfect.f1 == 1,
        ]
        box["ok"] = all(checks)
        box["detail"] = f"{sum(checks)}/{len(checks)} hand-computed values reproduced"


@pytest.mark.slow
def test_ac10_directional_claim():
    with criterion(10, "directional micro-F1 ordering on planted triplets", 600.0) as box:
        d = planted_dataset(PlantedConfig(n=500, m=8, triplets=((0, 3, 6), (1, 4, 7)), seed=1))
        cfg = ExperimentConfig(d, strategies=("random", "balancor", "dd-balancor"), k=3, r=2, folds=10, seed=0,
                               mode="confidence", tie_break="seeded-random")
        res = seed_sweep(cfg, range(10))
        rnd, bal, dd = (float(np.mean(res[s])) for s in ("random", "balancor", "dd-balancor"))
        gap, se = mean_and_se(np.array(res["dd-balancor"]) - np.array(res["random"]))
        box["ok"] = bal >= rnd and dd >= bal and gap > 2 * se
        box["detail"] = (f"random {rnd:.4f}, balancor {bal:.4f}, dd-balancor {dd:.4f}; "
                         f"dd-random gap {gap:.4f} (SE {se:.4f}, {gap / se:.1f} SE)")


def test_ac11_format_round_trips():
    with criterion(11, "byte-identical round trips of shipped fixtures", 1.0) as box:
        covers = sorted(FIXTURES.glob("*.labelcover"))
        natives = sorted(FIXTURES.glob("*.jsonl"))
        same = [serialize_matrix(parse_matrix(p.read_bytes().decode("ascii"))).encode() == p.read_bytes()
                for p in covers]
        same += [serialize_native(parse_native(p.read_bytes())).encode() == p.read_bytes() for p in natives]
        box["ok"] = len(covers) >= 1 and len(natives) >= 1 and all(same)
        box["detail"] = f"{sum(same)}/{len(same)} files identical ({len(covers)} labelcover, {len(natives)} native)"
