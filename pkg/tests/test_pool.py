import random
from datetime import datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seatcheck.errors import ConflictError, DomainError, NoReferenceError, NotFoundError
from seatcheck.pool import WeightPool
from seatcheck.refstats import Gender
from seatcheck.roster import Student

from conftest import COHORT_MEANS_KG, full_mean_table

NOW = datetime(2026, 3, 2, 9, 10, 0)
TABLE = full_mean_table()


def make_student(index: int, age: int, gender: Gender) -> Student:
    return Student(f"{index:08X}", f"N{index}", f"S{index}", "X", age, gender)


def test_add_member_uses_group_mean():
    pool = WeightPool()
    pool.add_member(make_student(1, 20, Gender.MALE), TABLE)
    assert pool.expected_total_kg == pytest.approx(94.59)


def test_two_members_sum():
    pool = WeightPool()
    pool.add_member(make_student(1, 20, Gender.MALE), TABLE)
    pool.add_member(make_student(2, 20, Gender.FEMALE), TABLE)
    assert pool.expected_total_kg == pytest.approx(164.79)


def test_duplicate_member_conflicts():
    pool = WeightPool()
    student = make_student(1, 20, Gender.MALE)
    pool.add_member(student, TABLE)
    with pytest.raises(ConflictError):
        pool.add_member(student, TABLE)


def test_missing_reference_cell_errors():
    pool = WeightPool()
    with pytest.raises(NoReferenceError):
        pool.add_member(make_student(1, 30, Gender.MALE), TABLE)


def test_add_then_remove_restores_total_exactly():
    pool = WeightPool()
    pool.add_member(make_student(1, 18, Gender.MALE), TABLE)
    pool.add_member(make_student(2, 21, Gender.FEMALE), TABLE)
    before = pool.expected_total_kg
    pool.add_member(make_student(3, 22, Gender.MALE), TABLE)
    pool.remove_member(make_student(3, 22, Gender.MALE).uid)
    assert pool.expected_total_kg == before  # bit-exact, not approx


def test_remove_from_empty_pool():
    pool = WeightPool()
    with pytest.raises(NotFoundError):
        pool.remove_member("00000001")


def test_add_a_add_b_remove_a():
    pool = WeightPool()
    a = make_student(1, 20, Gender.MALE)
    b = make_student(2, 19, Gender.FEMALE)
    pool.add_member(a, TABLE)
    pool.add_member(b, TABLE)
    pool.remove_member(a.uid)
    assert pool.expected_total_kg == pytest.approx(69.37)


# -- compare ------------------------------------------------------------------


def test_small_deviation_is_quiet():
    pool = WeightPool()
    pool.add_member(make_student(1, 20, Gender.MALE), TABLE)
    pool.add_member(make_student(2, 20, Gender.MALE), TABLE)
    assert pool.expected_total_kg == pytest.approx(189.18)
    assert pool.compare(189.0, NOW) is None


def test_large_deviation_reports():
    pool = WeightPool()
    pool.add_member(make_student(1, 20, Gender.MALE), TABLE)
    pool.add_member(make_student(2, 20, Gender.MALE), TABLE)
    report = pool.compare(120.0, NOW)
    assert report is not None
    assert report.expected_kg == pytest.approx(189.18)
    assert report.actual_kg == 120.0
    assert report.relative_deviation == pytest.approx(-0.3657, abs=1e-3)


def test_empty_pool_zero_actual_is_quiet():
    pool = WeightPool()
    assert pool.compare(0.0, NOW) is None


def test_empty_pool_uses_absolute_rule():
    pool = WeightPool()
    assert pool.compare(19.9, NOW) is None
    report = pool.compare(25.0, NOW)
    assert report is not None
    assert report.expected_kg == 0.0
    assert report.relative_deviation is None


def test_negative_actual_rejected():
    pool = WeightPool()
    with pytest.raises(DomainError):
        pool.compare(-1.0, NOW)


def test_anomaly_boundary_within_1e9():
    pool = WeightPool()
    pool.add_member(make_student(1, 20, Gender.MALE), TABLE)
    expected = pool.expected_total_kg
    threshold = pool.tolerance * expected
    eps = 1e-9 * expected
    assert pool.compare(expected + threshold - eps, NOW) is None
    assert pool.compare(expected - threshold + eps, NOW) is None
    assert pool.compare(expected + threshold + eps, NOW) is not None
    assert pool.compare(expected - threshold - eps, NOW) is not None


@given(
    st.floats(min_value=0.0, max_value=500.0),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_compare_monotone(actual, shrink):
    pool = WeightPool()
    pool.add_member(make_student(1, 20, Gender.MALE), TABLE)
    expected = pool.expected_total_kg
    if pool.compare(actual, NOW) is None:
        closer = expected + (actual - expected) * shrink
        assert pool.compare(closer, NOW) is None


# -- bookkeeping vs brute force ----------------------------------------------------


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_interleaved_ops_match_bruteforce(seed):
    rng = random.Random(seed)
    pool = WeightPool()
    alive: dict[str, float] = {}
    counter = 0
    for _ in range(rng.randint(1, 80)):
        if alive and rng.random() < 0.4:
            uid = rng.choice(sorted(alive))
            pool.remove_member(uid)
            del alive[uid]
        else:
            counter += 1
            age = rng.randint(18, 22)
            gender = rng.choice(list(Gender))
            student = make_student(counter, age, gender)
            pool.add_member(student, TABLE)
            alive[student.uid] = COHORT_MEANS_KG[(age, gender)]
        brute = 0.0
        for uid, _mean in pool.members:
            brute += _mean
        assert pool.expected_total_kg == brute


def test_pool_members_store_reference_means_only():
    pool = WeightPool()
    pool.add_member(make_student(1, 20, Gender.MALE), TABLE)
    for _uid, mean in pool.members:
        assert mean in COHORT_MEANS_KG.values()
