import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterlab import iid_oracle as oracle
from clusterlab.functionals import count, ei, length_pow, tmin

GRID = [(r, w) for r in range(2, 13) for w in (0.1, 0.3, 0.5)]


def test_small_pmf():
    np.testing.assert_allclose(oracle.closed_form_length_pmf(2, 0.5), [2 / 3, 1 / 3], rtol=1e-15)
    assert oracle.closed_form_length_pmf(1, 0.3).tolist() == [1.0]


def test_enumeration_examples():
    assert oracle.enumerate_patterns(2, 0.5, tmin())[0] == pytest.approx(1.0, abs=1e-15)
    assert oracle.enumerate_patterns(2, 0.5, length_pow(1))[0] == pytest.approx(1.0, abs=1e-15)
    for r, w in [(3, 0.2), (7, 0.5), (12, 0.01)]:
        assert oracle.enumerate_patterns(r, w, ei())[0] == pytest.approx(1 - (1 - w) ** r, abs=1e-14)


def test_enumeration_limit():
    with pytest.raises(ValueError):
        oracle.enumerate_patterns(25, 0.1, ei())
    with pytest.raises(ValueError):
        oracle.closed_form_length_pmf(3, 1.0)


@pytest.mark.parametrize("r, w", GRID)
def test_pmf_matches_enumeration(r, w):
    np.testing.assert_allclose(oracle.closed_form_length_pmf(r, w), oracle.enumerated_length_pmf(r, w), rtol=0, atol=1e-12)
    assert abs(math.fsum(oracle.closed_form_length_pmf(r, w)) - 1.0) < 1e-12


@pytest.mark.parametrize("r, w", GRID)
def test_moments_match_enumeration(r, w):
    for g in (0, 1, 2, 0.5):
        assert oracle.length_moment(r, w, g) == pytest.approx(oracle.enumerate_patterns(r, w, length_pow(g))[0], abs=1e-12)
    assert oracle.first_jump_moment(r, w, 1.5) == pytest.approx(
        oracle.enumerate_patterns(r, w, lambda s: s.first.astype(float) ** 1.5)[0], abs=1e-12)
    assert oracle.last_jump_moment(r, w, 2) == pytest.approx(
        oracle.enumerate_patterns(r, w, lambda s: s.last.astype(float) ** 2)[0], abs=1e-12)
    assert oracle.joint_product_moment(r, w, 1, 2) == pytest.approx(
        oracle.enumerate_patterns(r, w, lambda s: s.first * s.last.astype(float) ** 2)[0], abs=1e-10)
    assert oracle.joint_diff_moment(r, w, 1.5) == pytest.approx(
        oracle.enumerate_patterns(r, w, lambda s: (s.last - s.first).astype(float) ** 1.5)[0], abs=1e-10)


@pytest.mark.parametrize("r, w", GRID)
def test_time_reversal(r, w):
    a = oracle.enumerate_patterns(r, w, lambda s: s.first.astype(float))[0]
    b = oracle.enumerate_patterns(r, w, lambda s: (r + 1 - s.last).astype(float) * (s.count > 0))[0]
    assert a == pytest.approx(b, abs=1e-13)


def test_count_mean():
    # E[N] = r w and N vanishes off A
    assert oracle.enumerate_patterns(9, 0.3, count())[0] == pytest.approx(9 * 0.3, rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5000), st.floats(1e-9, 0.9))
def test_pmf_is_proper(r, w):
    f = oracle.closed_form_length_pmf(r, w)
    assert np.all(f >= 0)
    assert abs(math.fsum(f) - 1.0) < 1e-10


def test_moment_rate_table():
    rows = oracle.moment_rate_table([100, 1000], 1e-6, 1)
    by = {(r["r"], r["statistic"]): r for r in rows}
    assert by[(100, "length_small")]["rel_err"] < 0.02
    assert by[(1000, "first_jump")]["rel_err"] < 0.02
    assert set(rows[0]) >= {"r", "w", "gamma", "statistic", "value", "target", "rel_err"}
    rows = oracle.moment_rate_table([10, 20], lambda r: 1.0 / r**3, 0)
    assert rows[0]["w"] == pytest.approx(1e-3)
    rows = oracle.moment_rate_table([10, 20], [0.1, 0.2], 2)
    assert rows[-1]["w"] == 0.2 and rows[-1]["gamma"] == 2.0


def test_large_block_limit_is_reached_when_rw_small():
    rows = oracle.moment_rate_table([100_000], 1e-7, 1)
    v = [r for r in rows if r["statistic"] == "length_large"][0]
    assert v["rel_err"] < 0.01
