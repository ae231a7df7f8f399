"""Cross-validation of the exact distance solver against brute enumeration,
plus the metric-space and scaling properties the distances must satisfy."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewersim.ipcore import (
    IntervalPartition, scale, concat, dist_alpha, dist_hausdorff, distortion,
)
from helpers import make_rng, brute_force_distance, random_partition


def _close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


class TestAgainstBruteForce:
    def test_random_pairs_alpha(self):
        rng = make_rng(101, "metric-brute-alpha")
        for _ in range(150):
            a = random_partition(rng)
            b = random_partition(rng)
            assert _close(dist_alpha(a, b), brute_force_distance(a, b, True))

    def test_random_pairs_hausdorff(self):
        rng = make_rng(102, "metric-brute-h")
        for _ in range(150):
            a = random_partition(rng, with_diversity=False)
            b = random_partition(rng, with_diversity=False)
            assert _close(dist_hausdorff(a, b),
                          brute_force_distance(a, b, False))

    def test_adversarial_marks(self):
        # clustered diversity marks exercise the threshold search
        rng = make_rng(103, "metric-adversarial")
        for _ in range(60):
            n, m = rng.integers(1, 6, 2)
            a = IntervalPartition(rng.random(n) + 0.1,
                                  divs=np.sort(np.round(rng.random(n), 1)),
                                  total_diversity=2.0, alpha_div=0.5)
            b = IntervalPartition(rng.random(m) + 0.1,
                                  divs=np.sort(np.round(rng.random(m), 1)),
                                  total_diversity=2.0, alpha_div=0.5)
            assert _close(dist_alpha(a, b), brute_force_distance(a, b, True))


@st.composite
def tiny_partition(draw):
    n = draw(st.integers(0, 4))
    masses = draw(st.lists(st.floats(0.05, 4.0), min_size=n, max_size=n))
    marks = sorted(draw(st.lists(st.floats(0.0, 3.0), min_size=n, max_size=n)))
    total = (marks[-1] if n else 0.0) + draw(st.floats(0.0, 1.0))
    return IntervalPartition(masses, divs=marks, total_diversity=total,
                             alpha_div=0.5)


class TestMetricProperties:
    @given(tiny_partition(), tiny_partition())
    @settings(max_examples=80, deadline=None)
    def test_solver_matches_brute(self, a, b):
        assert _close(dist_alpha(a, b), brute_force_distance(a, b, True))
        assert _close(dist_hausdorff(a, b), brute_force_distance(a, b, False))

    @given(tiny_partition(), tiny_partition())
    @settings(max_examples=60, deadline=None)
    def test_symmetry(self, a, b):
        assert _close(dist_alpha(a, b), dist_alpha(b, a))
        assert _close(dist_hausdorff(a, b), dist_hausdorff(b, a))

    @given(tiny_partition(), tiny_partition(), tiny_partition())
    @settings(max_examples=60, deadline=None)
    def test_triangle(self, a, b, c):
        assert dist_alpha(a, c) <= dist_alpha(a, b) + dist_alpha(b, c) + 1e-10
        assert (dist_hausdorff(a, c)
                <= dist_hausdorff(a, b) + dist_hausdorff(b, c) + 1e-10)

    @given(tiny_partition(), tiny_partition())
    @settings(max_examples=60, deadline=None)
    def test_hausdorff_below_alpha(self, a, b):
        assert dist_hausdorff(a, b) <= dist_alpha(a, b) + 1e-12

    @given(tiny_partition())
    @settings(max_examples=40, deadline=None)
    def test_identity(self, a):
        assert dist_alpha(a, a) == 0.0


class TestScalingLaws:
    @given(tiny_partition(), tiny_partition(), st.floats(0.2, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_hausdorff_homogeneous(self, a, b, c):
        lhs = dist_hausdorff(scale(c, a), scale(c, b))
        assert _close(lhs, c * dist_hausdorff(a, b), tol=1e-9)

    @given(tiny_partition(), tiny_partition(), st.floats(0.2, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_alpha_scaling_sandwich(self, a, b, c):
        d = dist_alpha(a, b)
        dc = dist_alpha(scale(c, a), scale(c, b))
        fa = c ** a.alpha_div
        lo, hi = min(c, fa), max(c, fa)
        assert lo * d - 1e-9 <= dc <= hi * d + 1e-9

    @given(tiny_partition(), st.floats(0.2, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_scaling_displacement_bound(self, a, c):
        # moving to the c-scaled copy costs at most the larger of the mass
        # displacement and the diversity displacement
        d = dist_alpha(a, scale(c, a))
        bound = max(abs(c ** a.alpha_div - 1.0) * a.total_diversity,
                    abs(c - 1.0) * a.total_mass)
        assert d <= bound + 1e-9

    @given(tiny_partition(), tiny_partition(), tiny_partition(),
           tiny_partition())
    @settings(max_examples=40, deadline=None)
    def test_concat_subadditive(self, a, b, c, d):
        lhs = dist_alpha(concat([a, c]), concat([b, d]))
        assert lhs <= dist_alpha(a, b) + dist_alpha(c, d) + 1e-9


class TestDistortionHelper:
    def test_empty_pairing(self):
        a = IntervalPartition([1.0], divs=[0.5], total_diversity=0.5)
        b = IntervalPartition([2.0], divs=[0.1], total_diversity=0.1)
        val = distortion(a, b, [], use_diversity=True)
        assert val == pytest.approx(2.0)

    def test_matched_pairing(self):
        a = IntervalPartition([1.0], divs=[0.5], total_diversity=0.5)
        b = IntervalPartition([2.0], divs=[0.1], total_diversity=0.1)
        val = distortion(a, b, [(0, 0)], use_diversity=True)
        assert val == pytest.approx(1.0)   # mass gap 1 beats div gaps 0.4
