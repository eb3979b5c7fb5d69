"""Set-cover solvers and the cover-matrix construction strategies.

Two generic solvers work on an explicit :class:`ScpInstance`:
:func:`greedy_wscp` (ratio greedy) and :func:`exact_zero_one_ip`
(depth-first implicit enumeration). The labelset strategies
(:func:`inlac`, :func:`balco`, :func:`balancor`) specialise the greedy
loop to k-labelsets and run vectorised over all C(m, k) candidates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np

from .cover_core import (
    ENUMERATION_CAP,
    CoverMatrix,
    LabelSet,
    check_enumerable,
    combinations,
    require_valid,
)
from .errors import InsufficientCandidates, NoCoverError, SearchBudgetExceeded, ValidationError

TIE_BREAKS = ("lowest-index", "seeded-random")
STRATEGIES = ("random", "inlac", "balco", "balancor")


@dataclass(frozen=True)
class ScpInstance:
    universe: tuple[Hashable, ...]
    subsets: tuple[frozenset, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "subsets", tuple(frozenset(s) for s in self.subsets))
        if self.weights is None:
            object.__setattr__(self, "weights", (1.0,) * len(self.subsets))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != len(self.subsets):
            raise ValidationError("one weight per subset is required")
        if any(w <= 0 for w in self.weights):
            raise ValidationError("subset weights must be positive")
        universe = set(self.universe)
        for i, s in enumerate(self.subsets):
            if not s:
                raise ValidationError(f"subset {i} is empty")
            if not s <= universe:
                raise ValidationError(f"subset {i} has elements outside the universe: {sorted(s - universe, key=repr)}")
        missing = universe.difference(*self.subsets)
        if missing:
            raise NoCoverError(missing)

    @classmethod
    def build(cls, universe, subsets, weights=None) -> "ScpInstance":
        return cls(tuple(universe), tuple(subsets), weights)

    @property
    def n(self) -> int:
        return len(self.subsets)


@dataclass(frozen=True)
class CoverSolution:
    selected: tuple[int, ...]
    cost: float
    complete: bool
    nodes: int = 0


@dataclass(frozen=True)
class StrategyConfig:
    m: int
    k: int
    r: int = 2
    sigma: int | None = None  # None means unbounded
    seed: int = 0
    tie_break: str = "lowest-index"

    def __post_init__(self):
        if not 1 <= self.r <= self.k <= self.m:
            raise ValidationError(f"need 1 <= r <= k <= m, got r={self.r}, k={self.k}, m={self.m}")
        if self.sigma is not None and self.sigma < 1:
            raise ValidationError("sigma must be >= 1 when bounded")
        if self.tie_break not in TIE_BREAKS:
            raise ValidationError(f"tie_break must be one of {TIE_BREAKS}")
        if self.seed < 0:
            raise ValidationError("seed must be unsigned")


def _union_ok(instance: ScpInstance, selected) -> bool:
    covered = set().union(*(instance.subsets[j] for j in selected)) if selected else set()
    return covered >= set(instance.universe)


def greedy_wscp(instance: ScpInstance, tie_break: str = "lowest-index", seed: int = 0) -> CoverSolution:
    """Ratio greedy: repeatedly take the subset minimising weight / residual size."""
    rng = np.random.default_rng(seed) if tie_break == "seeded-random" else None
    residual = [set(s) for s in instance.subsets]
    uncovered = set(instance.universe)
    selected: list[int] = []
    while uncovered:
        best_ratio = math.inf
        best: list[int] = []
        for j, s in enumerate(residual):
            if not s:
                continue
            ratio = Fraction(instance.weights[j]) / len(s)
            if ratio < best_ratio:
                best_ratio, best = ratio, [j]
            elif ratio == best_ratio:
                best.append(j)
        if not best:
            raise NoCoverError(uncovered)
        q = best[0] if rng is None else best[int(rng.integers(len(best)))]
        chosen = instance.subsets[q]
        selected.append(q)
        uncovered -= chosen
        for s in residual:
            s -= chosen
    assert _union_ok(instance, selected)
    cost = math.fsum(instance.weights[j] for j in selected)
    return CoverSolution(tuple(selected), cost, True)


def exact_zero_one_ip(instance: ScpInstance, node_cap: int = 2**24) -> CoverSolution:
    """Optimal cover by depth-first implicit enumeration of the 0-1 program.

    Branches on the free variable whose activation removes the largest total
    constraint violation (number of still-uncovered elements it covers),
    trying x=1 before x=0. Nodes are pruned when the partial cost plus the
    cheapest free weight cannot beat the incumbent, or when the free
    variables can no longer cover what remains.
    """
    elements = {e: i for i, e in enumerate(instance.universe)}
    masks = [sum(1 << elements[e] for e in s) for s in instance.subsets]
    weights = instance.weights
    n = instance.n
    full = (1 << len(elements)) - 1

    best_cost = math.inf
    best_sel: tuple[int, ...] | None = None
    nodes = 0

    def search(covered: int, free: int, chosen: list[int], cost: float):
        nonlocal best_cost, best_sel, nodes
        nodes += 1
        if nodes > node_cap:
            raise SearchBudgetExceeded(
                f"implicit enumeration exceeded {node_cap} nodes",
                incumbent=None if best_sel is None else CoverSolution(best_sel, best_cost, True, nodes),
            )
        if covered == full:
            if cost < best_cost:
                best_cost, best_sel = cost, tuple(sorted(chosen))
            return
        missing = full & ~covered
        reach = 0
        branch, branch_gain = -1, 0
        cheapest = math.inf
        j = 0
        bits = free
        while bits:
            if bits & 1:
                gain = (masks[j] & missing).bit_count()
                if gain:
                    reach |= masks[j]
                    cheapest = min(cheapest, weights[j])
                    if gain > branch_gain:
                        branch, branch_gain = j, gain
            bits >>= 1
            j += 1
        if reach & missing != missing:
            return
        if cost + cheapest >= best_cost:
            return
        rest = free & ~(1 << branch)
        chosen.append(branch)
        search(covered | masks[branch], rest, chosen, cost + weights[branch])
        chosen.pop()
        search(covered, rest, chosen, cost)

    search(0, (1 << n) - 1, [], 0.0)
    if best_sel is None:
        raise NoCoverError(set(instance.universe))
    return CoverSolution(best_sel, math.fsum(weights[j] for j in best_sel), True, nodes)


class _Candidates:
    """All k-labelsets plus, when needed, the r-labelsets each one covers."""

    def __init__(self, m: int, k: int, r: int | None, cap: int = ENUMERATION_CAP):
        self.m, self.k = m, k
        self.sets = combinations(m, k, cap)
        self.mask = np.zeros((len(self.sets), m), dtype=np.int64)
        for i, s in enumerate(self.sets):
            self.mask[i, list(s)] = 1
        self.rsets = None
        self.r_index = None
        if r is not None:
            rsets = combinations(m, r, cap)
            if len(self.sets) * math.comb(k, r) > cap:
                raise ValidationError(f"candidate/r-labelset incidence too large for m={m}, k={k}, r={r}")
            lookup = {c: i for i, c in enumerate(rsets)}
            sub = combinations(k, r)
            self.rsets = rsets
            self.r_index = np.array([[lookup[tuple(s[p] for p in combo)] for combo in sub] for s in self.sets],
                                    dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.sets)

    def imbalance_after(self, freq: np.ndarray) -> np.ndarray:
        new = self.mask + freq
        return new.max(axis=1) - new.min(axis=1)


def _pick(allowed: np.ndarray, keys: Sequence[np.ndarray], rng) -> int:
    """Index maximising ``keys`` lexicographically among ``allowed``; ties by index or rng."""
    pool = np.flatnonzero(allowed)
    for key in keys:
        vals = key[pool]
        pool = pool[vals == vals.max()]
        if len(pool) == 1:
            break
    if rng is None or len(pool) == 1:
        return int(pool[0])
    return int(pool[rng.integers(len(pool))])


def _rng(config: StrategyConfig):
    return np.random.default_rng(config.seed) if config.tie_break == "seeded-random" else None


def _to_matrix(cands: _Candidates, selected, config: StrategyConfig, strategy: str, r: int) -> CoverMatrix:
    rows = tuple(LabelSet(cands.sets[i], config.m) for i in selected)
    return require_valid(CoverMatrix(m=config.m, k=config.k, rows=rows, strategy=strategy, r=r, seed=config.seed))


def _correlation_cover(config: StrategyConfig, hybrid: bool, cap: int) -> CoverMatrix:
    cands = _Candidates(config.m, config.k, config.r, cap)
    if config.sigma is not None and config.sigma > cands.n:
        raise InsufficientCandidates(f"sigma={config.sigma} exceeds C({config.m},{config.k})={cands.n}")
    rng = _rng(config)
    uncovered = np.ones(len(cands.rsets), dtype=np.int64)
    times_covered = np.zeros(len(cands.rsets), dtype=np.int64)
    freq = np.zeros(config.m, dtype=np.int64)
    used = np.zeros(cands.n, dtype=bool)
    selected: list[int] = []
    while True:
        if config.sigma is None and not uncovered.any():
            break
        if config.sigma is not None and len(selected) == config.sigma:
            break
        if uncovered.any():
            gain = uncovered[cands.r_index].sum(axis=1)
            allowed = (gain > 0) & ~used
            if hybrid:
                imb = cands.imbalance_after(freq)
                keys = [gain - imb, -imb]
            else:
                keys = [gain]
        else:
            # surplus rows: refresh the least-covered r-labelsets first
            if used.all():
                raise InsufficientCandidates("every k-labelset is already selected")
            least = (times_covered == times_covered.min()).astype(np.int64)
            allowed = ~used
            keys = [least[cands.r_index].sum(axis=1)]
            if hybrid:
                keys.append(-cands.imbalance_after(freq))
        q = _pick(allowed, keys, rng)
        selected.append(q)
        used[q] = True
        uncovered[cands.r_index[q]] = 0
        times_covered[cands.r_index[q]] += 1
        freq += cands.mask[q]
    return _to_matrix(cands, selected, config, "balancor" if hybrid else "inlac", config.r)


def inlac(config: StrategyConfig, cap: int = ENUMERATION_CAP) -> CoverMatrix:
    """Greedy cover of all r-labelsets by k-labelsets (max new coverage per step)."""
    return _correlation_cover(config, hybrid=False, cap=cap)


def balancor(config: StrategyConfig, cap: int = ENUMERATION_CAP) -> CoverMatrix:
    """Like :func:`inlac`, scoring each candidate as new coverage minus resulting imbalance."""
    return _correlation_cover(config, hybrid=True, cap=cap)


def balco(config: StrategyConfig, cap: int = ENUMERATION_CAP) -> CoverMatrix:
    """Select ``sigma`` distinct k-labelsets keeping label frequencies as even as possible."""
    if config.sigma is None:
        raise ValidationError("balco needs a bounded sigma")
    cands = _Candidates(config.m, config.k, None, cap)
    if config.sigma > cands.n:
        raise InsufficientCandidates(f"sigma={config.sigma} exceeds C({config.m},{config.k})={cands.n}")
    rng = _rng(config)
    freq = np.zeros(config.m, dtype=np.int64)
    used = np.zeros(cands.n, dtype=bool)
    selected = []
    for _ in range(config.sigma):
        imb = cands.imbalance_after(freq)
        at_min = (freq == freq.min()).astype(np.int64)
        q = _pick(~used, [-imb, cands.mask @ at_min], rng)
        selected.append(q)
        used[q] = True
        freq += cands.mask[q]
    return _to_matrix(cands, selected, config, "balco", 0)


def random_rakel_matrix(config: StrategyConfig, cap: int = ENUMERATION_CAP) -> CoverMatrix:
    """``sigma`` distinct k-labelsets drawn uniformly without replacement, in draw order."""
    if config.sigma is None:
        raise ValidationError("the random strategy needs a bounded sigma")
    total = math.comb(config.m, config.k)
    if config.sigma > total:
        raise InsufficientCandidates(f"sigma={config.sigma} exceeds C({config.m},{config.k})={total}")
    rng = np.random.default_rng(config.seed)
    if total <= cap:
        sets = combinations(config.m, config.k, cap)
        picks = [sets[i] for i in rng.choice(total, size=config.sigma, replace=False)]
    else:
        seen: set[tuple[int, ...]] = set()
        picks = []
        while len(picks) < config.sigma:
            s = tuple(sorted(int(x) for x in rng.choice(config.m, size=config.k, replace=False)))
            if s not in seen:
                seen.add(s)
                picks.append(s)
    rows = tuple(LabelSet(s, config.m) for s in picks)
    return require_valid(CoverMatrix(m=config.m, k=config.k, rows=rows, strategy="random", r=0, seed=config.seed))


def design(strategy: str, config: StrategyConfig, cap: int = ENUMERATION_CAP) -> CoverMatrix:
    builders = {"random": random_rakel_matrix, "inlac": inlac, "balco": balco, "balancor": balancor}
    if strategy not in builders:
        raise ValidationError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    return builders[strategy](config, cap=cap)


@dataclass(frozen=True)
class Lemma2Bounds:
    lower: float
    upper: float
    upper_assumption_holds: bool

    def __iter__(self):
        return iter((self.lower, self.upper))


def lemma2_bounds(m: int, k: int, r: int) -> Lemma2Bounds:
    """Lower and upper bound on the number of k-labelsets needed to cover every r-labelset.

    The lower bound may be fractional; its ceiling is the usable row count.
    The upper bound is derived assuming ``m % k == 0``; the flag reports it.
    """
    if not 1 <= r <= k <= m:
        raise ValidationError(f"need 1 <= r <= k <= m, got r={r}, k={k}, m={m}")
    lower = Fraction(math.comb(m, r), math.comb(k, r))
    upper = Fraction(m, k) + math.comb(m, r) - Fraction(m, k) * math.comb(k, r)
    return Lemma2Bounds(float(lower), float(upper), m % k == 0)


def balanced_cover_size(m: int, k: int) -> int:
    if not 1 <= k <= m:
        raise ValidationError(f"need 1 <= k <= m, got k={k}, m={m}")
    return math.lcm(k, m) // k
