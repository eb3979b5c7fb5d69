"""Coverage probability bounds for random k-labelsets and the estimators that check them.

The closed forms are evaluated in natural-log space so that sigma-th powers
neither underflow nor overflow; ``exact=True`` switches to rational
arithmetic for small verification grids.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cover_core import combinations
from .errors import BudgetError, InsufficientCandidates, ValidationError

EXACT_CAP = 10**8
MC_BATCH = 10_000


@dataclass(frozen=True)
class BoundReport:
    s1: float
    s2: float
    h: int
    bound: float
    raw_value: float
    direction: str  # "upper-on-coverage" or "lower-on-miss"


@dataclass(frozen=True)
class CoverageEstimate:
    probability: float
    trials: int
    std_error: float
    exact: bool
    with_replacement: bool = True


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def _harmonic_h(s1, s2) -> int:
    """Optimal integer for the Dawson-Sankoff combination: 1 + floor(2*s2/s1)."""
    if isinstance(s1, Fraction):
        return 1 + math.floor(2 * s2 / s1)
    return 1 + math.floor(2.0 * s2 / s1)


def dawson_sankoff_lower(s1: float, s2: float) -> float:
    """Lower bound on P(union of events) from the first two binomial moments."""
    if s1 <= 0:
        return 0.0
    if s2 < 0:
        raise ValidationError("s2 must be non-negative")
    h = _harmonic_h(s1, s2)
    value = Fraction(2, h + 1) * s1 - Fraction(2, h * (h + 1)) * s2 if isinstance(s1, Fraction) else \
        2.0 / (h + 1) * s1 - 2.0 / (h * (h + 1)) * s2
    return value


def _log_ds(log_s1: float, log_s2: float) -> tuple[int, float]:
    """Dawson-Sankoff value from log-moments; returns (h, value)."""
    if log_s1 == -math.inf:
        return 1, 0.0
    if log_s2 == -math.inf:
        return 1, math.exp(log_s1)
    h = 1 + math.floor(2.0 * math.exp(log_s2 - log_s1))
    a = math.log(2.0) + log_s1 - math.log(h + 1)
    b = math.log(2.0) + log_s2 - math.log(h) - math.log(h + 1)
    return h, math.exp(a) - math.exp(b)


def _log(x) -> float:
    return math.log(x) if x > 0 else -math.inf


def _logsumexp(*terms: float) -> float:
    top = max(terms)
    if top == -math.inf:
        return top
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


def pair_miss_probability(m: int, k: int, closed_form: bool = False) -> Fraction:
    """Probability that one uniform k-labelset does not contain a fixed pair of labels."""
    if closed_form:
        return Fraction((m - k) * (m + k - 1), m * (m - 1))
    return Fraction(math.comb(m - 2, k) + 2 * math.comb(m - 2, k - 1), math.comb(m, k))


def _lemma1_terms(m: int, k: int):
    total = math.comb(m, k)
    single = pair_miss_probability(m, k, closed_form=True)
    disjoint = Fraction(math.comb(m - 4, k) + 4 * math.comb(m - 4, k - 1) + 4 * math.comb(m - 4, k - 2), total) \
        if m >= 4 else Fraction(0)
    shared = Fraction(math.comb(m - 3, k) + 3 * math.comb(m - 3, k - 1) + math.comb(m - 3, k - 2), total)
    return single, disjoint, shared


def lemma1_pair_coverage_bound(m: int, k: int, sigma: int, exact: bool = False) -> BoundReport:
    """Upper bound on the probability that sigma i.i.d. k-labelsets cover every label pair.

    Event e_ij = "pair (i, j) is missed by all sigma draws". The first moment
    sums P(e_ij) over C(m,2) pairs; the second sums P(e_ij & e_st) over
    unordered pairs of distinct pairs, split into the 3*C(m,4) disjoint and
    3*C(m,3) overlapping configurations, each raised to the power sigma.
    """
    if not 2 <= k <= m:
        raise ValidationError(f"need 2 <= k <= m, got k={k}, m={m}")
    if sigma < 1:
        raise ValidationError("sigma must be >= 1")
    if k == m:
        return BoundReport(0.0, 0.0, 1, 1.0, 1.0, "upper-on-coverage")
    single, disjoint, shared = _lemma1_terms(m, k)
    n_disjoint = 3 * math.comb(m, 4)
    n_shared = 3 * math.comb(m, 3)
    if exact:
        s1 = math.comb(m, 2) * single**sigma
        s2 = n_disjoint * disjoint**sigma + n_shared * shared**sigma
        h = _harmonic_h(s1, s2)
        raw = 1 - dawson_sankoff_lower(s1, s2)
        return BoundReport(float(s1), float(s2), h, _clamp(float(raw)), float(raw), "upper-on-coverage")
    log_s1 = _log(math.comb(m, 2)) + sigma * _log(single)
    log_s2 = _logsumexp(_log(n_disjoint) + sigma * _log(disjoint), _log(n_shared) + sigma * _log(shared))
    h, ds = _log_ds(log_s1, log_s2)
    raw = 1.0 - ds
    return BoundReport(math.exp(log_s1), math.exp(log_s2), h, _clamp(raw), raw, "upper-on-coverage")


def misrepresentation_bound(m: int, k: int, sigma: int, exact: bool = False) -> BoundReport:
    """Lower bound on the probability that sigma i.i.d. k-labelsets leave some label unused."""
    if not 1 <= k <= m:
        raise ValidationError(f"need 1 <= k <= m, got k={k}, m={m}")
    if sigma < 1:
        raise ValidationError("sigma must be >= 1")
    if k == m:
        return BoundReport(0.0, 0.0, 1, 0.0, 0.0, "lower-on-miss")
    if exact:
        s1 = Fraction((m - k) ** sigma, m ** (sigma - 1))
        s2 = Fraction(((m - k) * (m - k - 1)) ** sigma, 2 * (m * (m - 1)) ** (sigma - 1))
        raw = dawson_sankoff_lower(s1, s2)
        h = _harmonic_h(s1, s2)
        return BoundReport(float(s1), float(s2), h, _clamp(float(raw)), float(raw), "lower-on-miss")
    log_s1 = sigma * math.log(m - k) - (sigma - 1) * math.log(m)
    if m - k - 1 > 0:
        log_s2 = sigma * (math.log(m - k) + math.log(m - k - 1)) - math.log(2) - (sigma - 1) * (math.log(m) + math.log(m - 1))
    else:
        log_s2 = -math.inf
    h, raw = _log_ds(log_s1, log_s2)
    return BoundReport(math.exp(log_s1), math.exp(log_s2), h, _clamp(raw), raw, "lower-on-miss")


def _rset_masks(m: int, k: int, r: int) -> tuple[list[int], int]:
    rsets = combinations(m, r)
    lookup = {c: i for i, c in enumerate(rsets)}
    masks = []
    for s in combinations(m, k):
        bits = 0
        for c in itertools.combinations(s, r):
            bits |= 1 << lookup[c]
        masks.append(bits)
    return masks, len(rsets)


def exact_coverage_fraction(m: int, k: int, sigma: int, r: int, cap: int = EXACT_CAP) -> Fraction:
    """Exact P(sigma i.i.d. uniform k-labelsets cover every r-labelset), by inclusion-exclusion.

    Sums over subsets A of r-labelsets: (-1)^|A| * (fraction of k-labelsets
    containing no member of A)^sigma. Subsets are grouped by that count, so
    the sigma-th powers are taken once per distinct count.
    """
    if not 1 <= r <= m or not 1 <= k <= m:
        raise ValidationError(f"need 1 <= r <= m and 1 <= k <= m, got m={m}, k={k}, r={r}")
    if sigma < 1:
        raise ValidationError("sigma must be >= 1")
    if r > k:
        return Fraction(0)
    n_k = math.comb(m, k)
    n_r = math.comb(m, r)
    work = (2**n_r) * n_k
    if work > cap and n_k**sigma > cap:
        raise BudgetError(f"exact coverage needs ~{min(work, n_k ** sigma)} steps (cap {cap}); use monte_carlo_coverage")
    if n_k**sigma <= work:
        return _coverage_by_tuples(m, k, sigma, r)
    masks, _ = _rset_masks(m, k, r)
    # count = number of k-labelsets containing no r-labelset of A
    signed = Counter()
    avoid_counts = Counter(masks)
    for a in range(2**n_r):
        count = sum(c for mk, c in avoid_counts.items() if mk & a == 0)
        signed[count] += -1 if a.bit_count() & 1 else 1
    total = sum(sign * count**sigma for count, sign in signed.items())
    return Fraction(total, n_k**sigma)


def _coverage_by_tuples(m: int, k: int, sigma: int, r: int) -> Fraction:
    masks, n_r = _rset_masks(m, k, r)
    full = (1 << n_r) - 1
    # distribution over covered-set states after each draw (ordered tuples)
    states = Counter({0: 1})
    for _ in range(sigma):
        nxt = Counter()
        for state, ways in states.items():
            for mk in masks:
                nxt[state | mk] += ways
        states = nxt
    return Fraction(states[full], len(masks) ** sigma)


def exact_coverage_probability(m: int, k: int, sigma: int, r: int, cap: int = EXACT_CAP) -> CoverageEstimate:
    p = exact_coverage_fraction(m, k, sigma, r, cap)
    return CoverageEstimate(float(p), 0, 0.0, True, True)


def _coverage_table(m: int, k: int, r: int) -> np.ndarray:
    rsets = combinations(m, r)
    lookup = {c: i for i, c in enumerate(rsets)}
    sets = combinations(m, k)
    table = np.zeros((len(sets), len(rsets)), dtype=bool)
    for i, s in enumerate(sets):
        for c in itertools.combinations(s, r):
            table[i, lookup[c]] = True
    return table


def _batch_hits(table: np.ndarray, sigma: int, trials: int, rng, with_replacement: bool) -> int:
    n = table.shape[0]
    if with_replacement:
        draws = rng.integers(n, size=(trials, sigma))
    else:
        draws = np.argsort(rng.random((trials, n)), axis=1)[:, :sigma]
    covered = table[draws].any(axis=1)
    return int(covered.all(axis=1).sum())


def monte_carlo_coverage(m: int, k: int, sigma: int, r: int, trials: int, seed: int = 0,
                         with_replacement: bool = True) -> CoverageEstimate:
    """Fraction of trials in which sigma random k-labelsets cover every r-labelset.

    Trials run in batches of MC_BATCH; batch b draws from the generator
    seeded with (seed, b), so batches are independent and order-free.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    n = math.comb(m, k)
    if not with_replacement and sigma > n:
        raise InsufficientCandidates(f"sigma={sigma} exceeds C({m},{k})={n} without replacement")
    if r > k:
        return CoverageEstimate(0.0, trials, 0.0, False, with_replacement)
    table = _coverage_table(m, k, r)
    hits = 0
    for b, start in enumerate(range(0, trials, MC_BATCH)):
        rng = np.random.default_rng([seed, b])
        hits += _batch_hits(table, sigma, min(MC_BATCH, trials - start), rng, with_replacement)
    p = hits / trials
    return CoverageEstimate(p, trials, math.sqrt(p * (1 - p) / trials), False, with_replacement)


@dataclass(frozen=True)
class CurvePoint:
    sigma: int
    bound: float
    estimate: float
    std_error: float


def coverage_curve(m: int, k: int, sigma_max: int, r: int = 2, trials: int = 10_000, seed: int = 0,
                   with_replacement: bool = True) -> list[CurvePoint]:
    """Bound and Monte Carlo estimate for each sigma in 1..sigma_max.

    The bound column is the pair-coverage bound, so it is only defined for
    r == 2; other orders report NaN there.
    """
    points = []
    for sigma in range(1, sigma_max + 1):
        bound = lemma1_pair_coverage_bound(m, k, sigma).bound if r == 2 and k >= 2 else math.nan
        est = monte_carlo_coverage(m, k, sigma, r, trials, seed=seed + sigma, with_replacement=with_replacement)
        points.append(CurvePoint(sigma, bound, est.probability, est.std_error))
    return points


def _g6(x: float) -> str:
    return f"{x:.6g}"


def curve_csv(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sigma", "bound", "estimate", "std_error"])
    for p in points:
        writer.writerow([p.sigma, _g6(p.bound), _g6(p.estimate), _g6(p.std_error)])
    return buf.getvalue()
