import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from isodepth.core import SortedSample1D, sort_and_validate
from isodepth.errors import IndexOutOfBounds, NotEnoughPoints
from isodepth.oracle import (
    depth_profile,
    expected_depth_any,
    expected_depth_at_sample,
    expected_depth_many,
    fast_profile,
    rank_by_depth,
)
from strategies import gap, samples


def enumerate_depths(xs, i):
    """Exact expected depth of xs[i] by recursion over split intervals (rational arithmetic).

    A split uniform on [xs[l], xs[r]] lands in gap (k, k+1) with probability
    gap_k / width; it separates the node into [l, k] and [k+1, r].
    """
    xs = [Fraction(x) for x in xs]

    def rec(l, r):
        if l == r:
            return Fraction(0)
        width = xs[r] - xs[l]
        tot = Fraction(1)
        for k in range(l, r):
            p = (xs[k + 1] - xs[k]) / width
            tot += p * (rec(l, k) if i <= k else rec(k + 1, r))
        return tot

    return rec(0, len(xs) - 1)


class TestKnownValues:
    def test_three_points(self):
        s = sort_and_validate([0, 1, 2])
        assert [expected_depth_at_sample(s, i) for i in (1, 2, 3)] == [1.5, 2.0, 1.5]

    def test_two_points(self):
        assert expected_depth_at_sample(sort_and_validate([0, 1]), 1) == 1.0

    def test_zero_one_three(self):
        assert expected_depth_at_sample(sort_and_validate([0, 1, 3]), 3) == pytest.approx(4 / 3, abs=1e-15)

    def test_enumeration_agrees(self):
        rng = np.random.default_rng(0)
        for n in range(2, 7):
            xs = np.sort(rng.integers(0, 50, size=n) + np.arange(n) * 50).astype(float)
            s = sort_and_validate(xs)
            for i in range(1, n + 1):
                exact = enumerate_depths(xs.tolist(), i - 1)
                assert expected_depth_at_sample(s, i) == pytest.approx(float(exact), abs=1e-12)

    def test_profile(self):
        assert depth_profile(sort_and_validate([0, 1, 2])).expected_depths.tolist() == [1.5, 2.0, 1.5]
        assert depth_profile(sort_and_validate([0, 1])).expected_depths.tolist() == [1.0, 1.0]

    def test_symmetric_equal_spacing(self):
        h = depth_profile(sort_and_validate(range(5))).expected_depths
        assert np.allclose(h, h[::-1], atol=1e-15, rtol=0)

    def test_errors(self):
        with pytest.raises(NotEnoughPoints):
            expected_depth_at_sample(sort_and_validate([1.0]), 1)
        with pytest.raises(IndexOutOfBounds):
            expected_depth_at_sample(sort_and_validate([0, 1]), 3)

    def test_csv(self):
        text = depth_profile(sort_and_validate([0, 1, 2])).to_csv()
        assert text.splitlines() == ["index,x,expected_depth", "1,0.0,1.5", "2,1.0,2.0", "3,2.0,1.5"]


class TestAnyQuery:
    s = sort_and_validate([0, 1, 3])

    def test_clamp_below(self):
        assert expected_depth_any(self.s, -7) == pytest.approx(5 / 3, abs=1e-15)

    def test_clamp_above(self):
        assert expected_depth_any(self.s, 99) == expected_depth_at_sample(self.s, 3)

    def test_interpolates(self):
        assert expected_depth_any(self.s, 2) == pytest.approx(5 / 3, abs=1e-15)

    def test_two_point_midpoint(self):
        assert expected_depth_any(sort_and_validate([0, 2]), 1) == 1.0

    def test_many(self):
        assert expected_depth_many(self.s, [-7, 2]).tolist() == pytest.approx([5 / 3, 5 / 3])

    @given(samples(min_n=2, max_n=15))
    @settings(max_examples=60)
    def test_exact_at_sample_points(self, s):
        for i in range(1, s.n + 1):
            assert expected_depth_any(s, s.values[i - 1]) == expected_depth_at_sample(s, i)


class TestRank:
    p = depth_profile(sort_and_validate([0, 1, 2]))

    def test_tie_goes_to_smaller_index(self):
        assert rank_by_depth(self.p, 1) == [1]
        assert rank_by_depth(self.p, 2) == [1, 3]

    def test_marginal_anomaly_first(self):
        s = SortedSample1D.from_gaps([5.0] + [1.0] * 10)
        assert rank_by_depth(depth_profile(s), 1) == [1]

    def test_bad_m(self):
        with pytest.raises(IndexOutOfBounds):
            rank_by_depth(self.p, 4)


class TestProperties:
    @given(samples(min_n=2, max_n=40))
    def test_range(self, s):
        h = depth_profile(s).expected_depths
        assert np.all(h >= 1 - 1e-12) and np.all(h <= s.n - 1 + 1e-12)

    @given(samples(min_n=3, max_n=40), st.data())
    def test_decomposition(self, s, data):
        i = data.draw(st.integers(2, s.n - 1))
        left = SortedSample1D(s.values[:i])
        right = SortedSample1D(s.values[i - 1:])
        total = expected_depth_at_sample(left, i) + expected_depth_at_sample(right, 1)
        assert expected_depth_at_sample(s, i) == pytest.approx(total, abs=1e-12, rel=0)

    @given(samples(min_n=2, max_n=40), gap)
    def test_add_point(self, s, g):
        x0 = s.values[0] - g
        t = SortedSample1D(np.concatenate([[x0], s.values]))
        a = depth_profile(s).expected_depths
        b = depth_profile(t).expected_depths[1:]
        inc = (s.values[0] - x0) / (s.values - x0)
        assert np.allclose(b - a, inc, atol=1e-12, rtol=0)

    @given(samples(min_n=2, max_n=30), st.floats(0.1, 10), st.floats(-50, 50))
    def test_affine_invariance(self, s, a, b):
        t = SortedSample1D(a * s.values + b)
        assert np.allclose(depth_profile(t).expected_depths, depth_profile(s).expected_depths,
                           atol=1e-12, rtol=0)

    @given(samples(min_n=2, max_n=30))
    def test_reflection(self, s):
        r = SortedSample1D(-s.values[::-1])
        assert np.allclose(depth_profile(r).expected_depths[::-1], depth_profile(s).expected_depths,
                           atol=1e-12, rtol=0)

    @given(samples(min_n=2, max_n=30))
    def test_fast_profile_agrees(self, s):
        assert np.allclose(fast_profile(s.values), depth_profile(s).expected_depths, atol=1e-11, rtol=0)

    @given(samples(min_n=2, max_n=10), st.floats(0, 1))
    @settings(max_examples=50)
    def test_interpolation_between_neighbours(self, s, u):
        i = int(u * (s.n - 1)) if s.n > 1 else 0
        i = min(i, s.n - 2)
        x = s.values[i] + u * (s.values[i + 1] - s.values[i])
        assume(s.values[i] <= x < s.values[i + 1])
        h = expected_depth_any(s, x)
        lo, hi = sorted((expected_depth_at_sample(s, i + 1), expected_depth_at_sample(s, i + 2)))
        assert lo - 1e-12 <= h <= hi + 1e-12


def test_two_points_always_depth_one():
    for xs in itertools.permutations([0.5, 3.0]):
        h = depth_profile(sort_and_validate(xs)).expected_depths
        assert h.tolist() == [1.0, 1.0]
        assert math.isclose(sum(h), 2.0)
