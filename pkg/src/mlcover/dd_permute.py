"""Data-driven column permutation of a cover matrix.

A permutation ``perm`` places label ``perm[c]`` on column ``c``. Every
(r+1)-labelset whose labels co-occur at least ``MIN_COOCCUR`` times gets a
chi-square dependency score; the merit of a permutation sums the weights of
the (r+1)-labelsets that some permuted row contains. Simulated annealing
over pairwise swaps searches for a high-merit permutation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cover_core import CoverMatrix, LabelSet, covered_rsets, require_valid
from .dataset_io import MultiLabelDataset, cooccurrence
from .errors import ValidationError

MIN_COOCCUR = 5
GAMMA = 0.85
T_FLOOR = 1e-9
MERIT_KINDS = ("composite", "count")


@dataclass(frozen=True)
class ContingencyCube:
    """2**order cell counts; axis i index 0 means label i present, 1 absent."""

    cells: np.ndarray

    @property
    def order(self) -> int:
        return self.cells.ndim

    @property
    def total(self) -> int:
        return int(self.cells.sum())

    @classmethod
    def from_indicators(cls, Y: np.ndarray) -> "ContingencyCube":
        order = Y.shape[1]
        idx = (~Y).astype(np.int64) @ (2 ** np.arange(order - 1, -1, -1))
        cells = np.bincount(idx, minlength=2**order).reshape((2,) * order)
        return cls(cells)


def expected_counts(cube: ContingencyCube) -> np.ndarray:
    """Mutual-independence expectation: product of one-way marginals / N**(order-1)."""
    cells = cube.cells.astype(float)
    n = cells.sum()
    E = np.ones_like(cells)
    for axis in range(cube.order):
        others = tuple(a for a in range(cube.order) if a != axis)
        marg = cells.sum(axis=others)
        shape = [1] * cube.order
        shape[axis] = 2
        E = E * marg.reshape(shape)
    return E / n ** (cube.order - 1)


def chi_square(cube: ContingencyCube) -> float | None:
    """Pearson statistic sum((E - n)**2 / E); None when some expected cell is 0."""
    if cube.total <= 0:
        raise ValidationError("contingency cube is empty")
    E = expected_counts(cube)
    if (E <= 0).any():
        return None
    return float(((E - cube.cells) ** 2 / E).sum())


@dataclass(frozen=True)
class DependencyWeight:
    chi2: float
    cooccur: int


@dataclass(frozen=True)
class DependencyWeights:
    order: int
    entries: dict = field(default_factory=dict)  # sorted label tuple -> DependencyWeight

    def __len__(self):
        return len(self.entries)

    def value(self, labels: tuple[int, ...], kind: str = "composite") -> float:
        w = self.entries[labels]
        return w.chi2 * w.cooccur if kind == "composite" else float(w.cooccur)


def dependency_weights(d: MultiLabelDataset, r: int, min_cooccur: int = MIN_COOCCUR) -> DependencyWeights:
    if r < 1:
        raise ValidationError("r must be >= 1")
    order = r + 1
    table = cooccurrence(d, order)
    Y = d.Y
    entries = {}
    for labels, count in table.entries.items():
        if count < min_cooccur:
            continue
        chi2 = chi_square(ContingencyCube.from_indicators(Y[:, list(labels)]))
        if chi2 is None:
            continue
        entries[labels] = DependencyWeight(chi2, count)
    return DependencyWeights(order, entries)


def _check_perm(perm: Sequence[int], m: int) -> np.ndarray:
    arr = np.asarray(perm, dtype=np.int64)
    if arr.shape != (m,) or sorted(arr.tolist()) != list(range(m)):
        raise ValidationError(f"permutation must be a bijection on range({m}), got {list(perm)}")
    return arr


class MeritEvaluator:
    """Precomputes the matrix's covered column-sets so merit is a table lookup."""

    def __init__(self, matrix: CoverMatrix, weights: DependencyWeights, kind: str = "composite"):
        if kind not in MERIT_KINDS:
            raise ValidationError(f"merit kind must be one of {MERIT_KINDS}")
        self.m = matrix.m
        order = weights.order
        self.labels = np.array(list(weights.entries), dtype=np.int64).reshape(len(weights), order)
        self.values = np.array([weights.value(t, kind) for t in weights.entries], dtype=float)
        self.powers = self.m ** np.arange(order, dtype=np.int64)
        self.covered = np.zeros(self.m**order if order <= matrix.k else 1, dtype=bool)
        if order <= matrix.k:
            for combo in covered_rsets(matrix.row_tuples(), order):
                self.covered[np.dot(combo, self.powers)] = True
        self.order_fits = order <= matrix.k

    def __call__(self, perm) -> float:
        if not len(self.values) or not self.order_fits:
            return 0.0
        pos = np.empty(self.m, dtype=np.int64)
        pos[np.asarray(perm)] = np.arange(self.m)
        cols = np.sort(pos[self.labels], axis=1)
        return float(self.values[self.covered[cols @ self.powers]].sum())


def merit(matrix: CoverMatrix, permutation: Sequence[int], weights: DependencyWeights,
          kind: str = "composite") -> float:
    perm = _check_perm(permutation, matrix.m)
    return MeritEvaluator(matrix, weights, kind)(perm)


def iteration_budget(m: int, sigma: int) -> int:
    if m < 2 or sigma < 1:
        raise ValidationError("need m >= 2 and sigma >= 1")
    return max(round(1368 * math.log(m) + 12 * math.log(sigma) - 2179), 2000)


@dataclass
class AnnealResult:
    permutation: tuple[int, ...]
    merit: float
    initial_merit: float
    iterations: int
    trace: list[float]
    initial_temperature: float = 0.0


def anneal_permutation(matrix: CoverMatrix, weights: DependencyWeights, seed: int = 0, gamma: float = GAMMA,
                       iterations: int | None = None, kind: str = "composite") -> AnnealResult:
    """Simulated annealing over label permutations with uniform random pair swaps.

    Worse neighbours are accepted with probability exp(-delta / T); T starts
    at the spread of merit over 100 random neighbours of the start point and
    is multiplied by ``gamma`` after every iteration. The best permutation seen
    is returned.
    """
    m = matrix.m
    if not len(weights):
        return AnnealResult(tuple(range(m)), 0.0, 0.0, 0, [], 0.0)
    evaluate = MeritEvaluator(matrix, weights, kind)
    rng = np.random.default_rng(seed)
    n_iter = iteration_budget(m, matrix.sigma) if iterations is None else iterations

    current = rng.permutation(m)
    cur_merit = evaluate(current)
    probe = []
    for _ in range(100):
        i, j = rng.choice(m, size=2, replace=False)
        cand = current.copy()
        cand[i], cand[j] = cand[j], cand[i]
        probe.append(evaluate(cand))
    T = float(np.std(probe)) or 1.0
    T0 = T

    best, best_merit = current.copy(), cur_merit
    initial = cur_merit
    trace = []
    for _ in range(n_iter):
        i, j = rng.choice(m, size=2, replace=False)
        cand = current.copy()
        cand[i], cand[j] = cand[j], cand[i]
        cand_merit = evaluate(cand)
        delta = cur_merit - cand_merit
        if delta < 0 or rng.random() < math.exp(-delta / T):
            current, cur_merit = cand, cand_merit
            if cur_merit > best_merit:
                best, best_merit = current.copy(), cur_merit
        trace.append(cur_merit)
        T = max(gamma * T, T_FLOOR)
    return AnnealResult(tuple(int(x) for x in best), best_merit, initial, n_iter, trace, T0)


def apply_permutation(matrix: CoverMatrix, permutation: Sequence[int], strategy: str | None = None) -> CoverMatrix:
    perm = _check_perm(permutation, matrix.m)
    rows = tuple(LabelSet.of((int(perm[c]) for c in row), matrix.m) for row in matrix.rows)
    return require_valid(matrix.with_rows(rows, strategy=strategy or matrix.strategy))


def inverse_permutation(permutation: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(permutation)
    for c, label in enumerate(permutation):
        inv[label] = c
    return tuple(inv)


def exhaustive_best_merit(matrix: CoverMatrix, weights: DependencyWeights, kind: str = "composite") -> float:
    """Maximum merit over all m! permutations; only for tiny m."""
    if matrix.m > 8:
        raise ValidationError("exhaustive permutation search is limited to m <= 8")
    evaluate = MeritEvaluator(matrix, weights, kind)
    return max(evaluate(np.array(p)) for p in itertools.permutations(range(matrix.m)))


def dd_adjust(matrix: CoverMatrix, train: MultiLabelDataset, r: int, seed: int = 0,
              kind: str = "composite") -> tuple[CoverMatrix, AnnealResult]:
    """Permute ``matrix`` columns to cover the training set's strongest (r+1)-label dependencies."""
    weights = dependency_weights(train, r)
    result = anneal_permutation(matrix, weights, seed=seed, kind=kind)
    tag = "dd-" + matrix.strategy if not matrix.strategy.startswith("dd-") else matrix.strategy
    return apply_permutation(matrix, result.permutation, strategy=tag), result
