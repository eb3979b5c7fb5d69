import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlcover.cover_core import (
    CoverMatrix, LabelSet, cover_stats, covers, enumerate_k_labelsets, imbalance,
    parse_matrix, serialize_matrix, validate_matrix,
)
from mlcover.errors import EnumerationOverflow, InvalidOrder, ParseError, ValidationError

from conftest import FOUR_LABEL_ROWS, NINE_LABEL_ROWS


def pascal(n_max):
    rows = [[1]]
    for n in range(1, n_max + 1):
        prev = rows[-1]
        rows.append([1] + [prev[i - 1] + prev[i] for i in range(1, n)] + [1])
    return rows


def test_labelset_validation():
    assert LabelSet.of([3, 1, 1], 5).members == (1, 3)
    with pytest.raises(ValidationError):
        LabelSet((), 3)
    with pytest.raises(ValidationError):
        LabelSet((2, 1), 3)
    with pytest.raises(ValidationError):
        LabelSet((0, 3), 3)


def test_enumeration_examples():
    sets = enumerate_k_labelsets(4, 2)
    assert len(sets) == 6
    assert sets[0].members == (0, 1) and sets[-1].members == (2, 3)
    assert [s.members for s in enumerate_k_labelsets(3, 3)] == [(0, 1, 2)]
    assert len(enumerate_k_labelsets(6, 3)) == 20


def test_enumeration_matches_pascal_triangle():
    tri = pascal(20)
    for m in range(1, 21):
        for k in range(1, m + 1):
            if tri[m][k] > 200_000:
                continue
            sets = enumerate_k_labelsets(m, k)
            assert len(sets) == tri[m][k]
            assert sets == sorted(sets)


def test_enumeration_cap():
    with pytest.raises(EnumerationOverflow) as exc:
        enumerate_k_labelsets(30, 15)
    assert exc.value.count == 155117520


def test_covers_examples():
    s = LabelSet((3, 5, 7, 8), 9)
    assert covers(s, LabelSet((3, 7, 8), 9))
    assert covers(s, LabelSet((3, 5, 7), 9))
    assert not covers(LabelSet((2, 3, 4), 5), LabelSet((0, 1), 5))


@given(st.sets(st.integers(0, 9), min_size=1), st.sets(st.integers(0, 9), min_size=1))
def test_covers_is_monotone_in_the_subset(row, r1):
    s, big = LabelSet.of(row, 10), LabelSet.of(r1, 10)
    if covers(s, big):
        for size in range(1, len(big) + 1):
            for sub in itertools.combinations(big.members, size):
                assert covers(s, LabelSet(sub, 10))


def test_nine_label_matrix_stats():
    mat = CoverMatrix.from_rows(NINE_LABEL_ROWS, 9)
    assert cover_stats(mat, 1).uncovered_labels == (8,)
    pairs = cover_stats(mat, 2).uncovered_sample
    assert LabelSet((0, 3), 9) in pairs


def test_four_label_matrix_stats():
    stats = cover_stats(CoverMatrix.from_rows(FOUR_LABEL_ROWS, 4), 2)
    assert (stats.r_covered, stats.r_total) == (6, 6)
    assert stats.label_frequency == (3, 2, 2, 2)
    assert stats.imbalance == 1
    assert stats.complete


def test_order_above_weight_rejected():
    with pytest.raises(InvalidOrder):
        cover_stats(CoverMatrix.from_rows(FOUR_LABEL_ROWS, 4), 4)


def test_imbalance_examples():
    assert imbalance((3, 2, 2, 2)) == 1
    assert imbalance((2, 2, 2)) == 0
    assert imbalance((5, 0)) == 5


def test_validate_matrix():
    assert validate_matrix(CoverMatrix.from_rows(FOUR_LABEL_ROWS, 4)).ok
    bad = CoverMatrix(m=4, k=3, rows=(LabelSet((0, 1, 2), 4), LabelSet((0, 1), 4)))
    rep = validate_matrix(bad)
    assert not rep.ok and "weight" in rep.violations[0]
    # the two identical weight-5 rows of the nine-label example
    dup = CoverMatrix.from_rows([NINE_LABEL_ROWS[1], NINE_LABEL_ROWS[4], NINE_LABEL_ROWS[6]], 9)
    rep = validate_matrix(dup)
    assert rep.ok and len(rep.warnings) == 1


matrices = st.integers(2, 9).flatmap(
    lambda m: st.integers(1, m).flatmap(
        lambda k: st.lists(st.sets(st.integers(0, m - 1), min_size=k, max_size=k), min_size=1, max_size=8).map(
            lambda rows: CoverMatrix.from_rows(rows, m, k))))


@given(matrices)
def test_frequency_sum_is_sigma_times_k(mat):
    stats = cover_stats(mat, 1)
    assert sum(stats.label_frequency) == mat.sigma * mat.k
    assert 0 <= stats.r_covered <= stats.r_total


@given(matrices, st.data())
def test_coverage_monotone_when_appending(mat, data):
    extra = data.draw(st.sets(st.integers(0, mat.m - 1), min_size=mat.k, max_size=mat.k))
    grown = mat.with_rows(mat.rows + (LabelSet.of(extra, mat.m),))
    for r in range(1, mat.k + 1):
        assert cover_stats(grown, r).r_covered >= cover_stats(mat, r).r_covered


@given(matrices)
def test_serialize_round_trip(mat):
    text = serialize_matrix(mat)
    back = parse_matrix(text)
    assert back == mat
    assert serialize_matrix(back) == text


def test_serialized_layout():
    text = serialize_matrix(CoverMatrix.from_rows(FOUR_LABEL_ROWS, 4, strategy="inlac", r=2))
    assert text == "labelcover 1\nm=4 k=3 sigma=3 r=2 strategy=inlac seed=0\n1110\n1101\n1011\n"


@pytest.mark.parametrize("text, line", [
    ("labelcover 2\nm=2 k=1 sigma=1 r=0 strategy=x seed=0\n10\n", 1),
    ("labelcover 1\nm=2 k=1 sigma=1 r=0 strategy=x seed=0\n11\n", 3),
    ("labelcover 1\nm=2 k=1 sigma=1 r=0 strategy=x seed=0\n1\n", 3),
    ("labelcover 1\nk=1 m=2 sigma=1 r=0 strategy=x seed=0\n10\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as exc:
        parse_matrix(text)
    assert exc.value.line == line


def test_parse_rejects_crlf_and_wrong_row_count():
    with pytest.raises(ParseError):
        parse_matrix("labelcover 1\r\nm=2 k=1 sigma=1 r=0 strategy=x seed=0\r\n10\r\n")
    with pytest.raises(ParseError):
        parse_matrix("labelcover 1\nm=2 k=1 sigma=2 r=0 strategy=x seed=0\n10\n")


def test_to_array_matches_rows():
    mat = CoverMatrix.from_rows(FOUR_LABEL_ROWS, 4)
    assert np.array_equal(mat.to_array().sum(axis=0), [3, 2, 2, 2])
