import random

import pytest
from hypothesis import given, strategies as st

from tailsig.ingest import TransactionRecord
from tailsig.profile import profile_counts, workload_profile


def records_from_counts(counts):
    return [TransactionRecord(i, label, 1.0) for label, n in counts.items() for i in range(n)]


def test_single_type():
    p = workload_profile(records_from_counts({"only": 7}))
    assert p.n_types == 1
    assert p.types_to_cover == {80: 1, 90: 1, 95: 1, 100: 1}
    assert p.top5_shares == (1.0,)


def test_ten_equal_types():
    p = profile_counts({f"t{i}": 10 for i in range(10)})
    assert p.types_to_cover == {80: 8, 90: 9, 95: 10, 100: 10}
    assert p.top10_share == 1.0
    assert p.types_ge_1pct == 10


def test_ties_broken_by_label():
    p = profile_counts({"b": 5, "a": 5, "c": 9})
    assert [t for t, _ in p.type_counts] == ["c", "a", "b"]


def test_empty_input_errors():
    with pytest.raises(ValueError):
        workload_profile([])


def test_one_percent_threshold_is_inclusive():
    p = profile_counts({"big": 99, "small": 1})
    assert p.types_ge_1pct == 2


@given(st.dictionaries(st.text(min_size=1, max_size=4), st.integers(1, 500), min_size=1, max_size=30))
def test_profile_invariants(counts):
    p = profile_counts(counts)
    assert sum(c for _, c in p.type_counts) == p.total_tx
    assert p.types_to_cover[100] == p.n_types
    cover = [p.types_to_cover[q] for q in (80, 90, 95, 100)]
    assert cover == sorted(cover)
    assert list(p.top5_shares) == sorted(p.top5_shares, reverse=True)
    assert all(0 <= s <= 1 for s in p.top5_shares)
    assert sum(c for _, c in p.type_counts) / p.total_tx == pytest.approx(1.0)


def test_permutation_invariant():
    recs = records_from_counts({"a": 30, "b": 20, "c": 20, "d": 1})
    shuffled = list(recs)
    random.Random(4).shuffle(shuffled)
    assert workload_profile(recs) == workload_profile(shuffled)
