"""Labelsets, cover matrices and the coverage analytics every strategy uses.

Labels are 0-indexed everywhere in this package. A cover matrix is a
sigma x m binary matrix whose rows are k-labelsets; it is stored as an
ordered tuple of :class:`LabelSet` rows rather than as a dense array.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EnumerationOverflow, InvalidOrder, ParseError, ValidationError

ENUMERATION_CAP = 5_000_000
UNCOVERED_SAMPLE_CAP = 100
UNBOUNDED = None  # sigma value meaning "until coverage is complete"


@dataclass(frozen=True, order=True)
class LabelSet:
    """Strictly increasing tuple of label indices drawn from ``range(m)``."""

    members: tuple[int, ...]
    m: int

    def __post_init__(self):
        members = tuple(int(x) for x in self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValidationError("a labelset needs at least one member")
        if any(b <= a for a, b in zip(members, members[1:])):
            raise ValidationError(f"labelset members must be strictly increasing: {members}")
        if members[0] < 0 or members[-1] >= self.m:
            raise ValidationError(f"labelset {members} out of range for m={self.m}")

    @classmethod
    def of(cls, labels: Iterable[int], m: int) -> "LabelSet":
        return cls(tuple(sorted(set(labels))), m)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, label):
        return label in self.members

    def issubset(self, other: "LabelSet") -> bool:
        return set(self.members) <= set(other.members)

    def mask(self) -> np.ndarray:
        row = np.zeros(self.m, dtype=bool)
        row[list(self.members)] = True
        return row

    def __str__(self):
        return "{" + ",".join(map(str, self.members)) + "}"


@dataclass(frozen=True)
class CoverMatrix:
    """Ordered rows of k-labelsets over ``m`` labels.

    Construction does not enforce constant row weight, so that damaged
    matrices can still be inspected with :func:`validate_matrix`; parsers
    and strategies validate before returning.
    """

    m: int
    k: int
    rows: tuple[LabelSet, ...]
    strategy: str = "manual"
    r: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def sigma(self) -> int:
        return len(self.rows)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int]], m: int, k: int | None = None, **kw) -> "CoverMatrix":
        sets = tuple(LabelSet.of(r, m) for r in rows)
        if k is None:
            k = len(sets[0]) if sets else 0
        return cls(m=m, k=k, rows=sets, **kw)

    def to_array(self) -> np.ndarray:
        arr = np.zeros((self.sigma, self.m), dtype=bool)
        for i, row in enumerate(self.rows):
            arr[i, list(row.members)] = True
        return arr

    def row_tuples(self) -> list[tuple[int, ...]]:
        return [row.members for row in self.rows]

    def with_rows(self, rows: Sequence[LabelSet], **changes) -> "CoverMatrix":
        params = dict(m=self.m, k=self.k, strategy=self.strategy, r=self.r, seed=self.seed)
        params.update(changes)
        return CoverMatrix(rows=tuple(rows), **params)

    def prefix(self, n: int) -> "CoverMatrix":
        return self.with_rows(self.rows[:n])

    # labelcover v1 text format
    def to_text(self) -> str:
        return serialize_matrix(self)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_text().encode("ascii"))

    @classmethod
    def load(cls, path) -> "CoverMatrix":
        return parse_matrix(Path(path).read_bytes().decode("ascii"))


@dataclass(frozen=True)
class CoverStats:
    label_frequency: tuple[int, ...]
    imbalance: int
    r: int
    r_covered: int
    r_total: int
    uncovered_labels: tuple[int, ...]
    uncovered_sample: tuple[LabelSet, ...] = field(default=())

    @property
    def complete(self) -> bool:
        return self.r_covered == self.r_total


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


def n_choose(m: int, k: int) -> int:
    return math.comb(m, k)


def check_enumerable(m: int, k: int, cap: int = ENUMERATION_CAP) -> int:
    if not 1 <= k <= m:
        raise ValidationError(f"need 1 <= k <= m, got k={k}, m={m}")
    count = math.comb(m, k)
    if count > cap:
        raise EnumerationOverflow(f"C({m},{k})", count, cap)
    return count


def combinations(m: int, k: int, cap: int = ENUMERATION_CAP) -> list[tuple[int, ...]]:
    """All k-subsets of ``range(m)`` as tuples, lexicographic."""
    check_enumerable(m, k, cap)
    return list(itertools.combinations(range(m), k))


def enumerate_k_labelsets(m: int, k: int, cap: int = ENUMERATION_CAP) -> list[LabelSet]:
    return [LabelSet(c, m) for c in combinations(m, k, cap)]


def covers(s: LabelSet | Iterable[int], r_set: LabelSet | Iterable[int]) -> bool:
    return set(r_set) <= set(s)


def imbalance(frequencies) -> int:
    freqs = list(frequencies)
    if not freqs:
        raise ValidationError("imbalance needs a non-empty frequency vector")
    return int(max(freqs) - min(freqs))


def label_frequency(matrix: CoverMatrix) -> tuple[int, ...]:
    freq = [0] * matrix.m
    for row in matrix.rows:
        for label in row:
            freq[label] += 1
    return tuple(freq)


def covered_rsets(rows: Iterable[Iterable[int]], r: int) -> set[tuple[int, ...]]:
    out: set[tuple[int, ...]] = set()
    for row in rows:
        out.update(itertools.combinations(sorted(row), r))
    return out


def cover_stats(matrix: CoverMatrix, r: int) -> CoverStats:
    if r < 1:
        raise InvalidOrder(f"correlation order must be >= 1, got {r}")
    if r > matrix.k:
        raise InvalidOrder(f"order r={r} exceeds row weight k={matrix.k}")
    freq = label_frequency(matrix)
    covered = covered_rsets(matrix.row_tuples(), r)
    total = math.comb(matrix.m, r)
    sample = []
    if len(covered) < total:
        for combo in itertools.combinations(range(matrix.m), r):
            if combo not in covered:
                sample.append(LabelSet(combo, matrix.m))
                if len(sample) >= UNCOVERED_SAMPLE_CAP:
                    break
    return CoverStats(
        label_frequency=freq,
        imbalance=imbalance(freq),
        r=r,
        r_covered=len(covered),
        r_total=total,
        uncovered_labels=tuple(j for j, f in enumerate(freq) if f == 0),
        uncovered_sample=tuple(sample),
    )


def validate_matrix(matrix: CoverMatrix) -> ValidationReport:
    violations = []
    warnings = []
    if matrix.sigma < 1:
        violations.append("matrix has no rows")
    if not 1 <= matrix.k <= matrix.m:
        violations.append(f"row weight k={matrix.k} outside [1, m={matrix.m}]")
    seen: dict[tuple[int, ...], int] = {}
    for i, row in enumerate(matrix.rows):
        if row.m != matrix.m or row.members[-1] >= matrix.m:
            violations.append(f"row {i} indexes labels outside range(m={matrix.m})")
        if len(row) != matrix.k:
            violations.append(f"row {i} has weight {len(row)}, expected k={matrix.k}")
        if row.members in seen:
            warnings.append(f"row {i} duplicates row {seen[row.members]}")
        else:
            seen[row.members] = i
    return ValidationReport(ok=not violations, violations=tuple(violations), warnings=tuple(warnings))


def require_valid(matrix: CoverMatrix) -> CoverMatrix:
    report = validate_matrix(matrix)
    if not report.ok:
        raise ValidationError("; ".join(report.violations))
    return matrix


_HEADER = "labelcover 1"


def serialize_matrix(matrix: CoverMatrix) -> str:
    lines = [
        _HEADER,
        f"m={matrix.m} k={matrix.k} sigma={matrix.sigma} r={matrix.r} "
        f"strategy={matrix.strategy} seed={matrix.seed}",
    ]
    for row in matrix.rows:
        bits = ["0"] * matrix.m
        for label in row:
            bits[label] = "1"
        lines.append("".join(bits))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> CoverMatrix:
    if "\r" in text:
        raise ParseError("CR characters are not allowed (LF line endings only)")
    if not text.endswith("\n"):
        raise ParseError("file must end with a newline")
    lines = text[:-1].split("\n")
    if lines[0] != _HEADER:
        raise ParseError(f"expected {_HEADER!r}", line=1)
    if len(lines) < 2:
        raise ParseError("missing parameter line", line=2)
    params = {}
    for token in lines[1].split(" "):
        key, sep, value = token.partition("=")
        if not sep or key in params:
            raise ParseError(f"bad parameter token {token!r}", line=2)
        params[key] = value
    expected = ["m", "k", "sigma", "r", "strategy", "seed"]
    if list(params) != expected:
        raise ParseError(f"parameter line must list {' '.join(expected)} in order", line=2)
    try:
        m, k, sigma, r, seed = (int(params[x]) for x in ("m", "k", "sigma", "r", "seed"))
    except ValueError as exc:
        raise ParseError(f"non-integer parameter: {exc}", line=2) from None
    if not params["strategy"] or any(c.isspace() for c in params["strategy"]):
        raise ParseError("strategy must be a non-empty token", line=2)
    body = lines[2:]
    if len(body) != sigma:
        raise ParseError(f"declared sigma={sigma} but found {len(body)} rows")
    rows = []
    for i, line in enumerate(body, start=3):
        if len(line) != m or set(line) - {"0", "1"}:
            raise ParseError(f"row must be exactly {m} characters of 0/1", line=i)
        ones = [j for j, c in enumerate(line) if c == "1"]
        if len(ones) != k:
            raise ParseError(f"row has {len(ones)} ones, expected k={k}", line=i)
        rows.append(LabelSet(tuple(ones), m))
    return CoverMatrix(m=m, k=k, rows=tuple(rows), strategy=params["strategy"], r=r, seed=seed)
