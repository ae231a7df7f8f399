"""Unit tests for interval partitions: algebra, serialization, sampling."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewersim.ipcore import (
    IntervalPartition, concat, scale, truncate, diversity_estimate,
    sample_stable_ip, Correspondence, dist_hausdorff, dist_alpha,
)
from helpers import (
    make_rng, stable_ip_expected_count, stable_ip_windowed_mass,
)


def marked(masses, divs, total, alpha=0.5):
    return IntervalPartition(masses, divs=divs, total_diversity=total,
                             alpha_div=alpha)


class TestConstruction:
    def test_basic(self):
        p = marked([1.0, 2.0], [0.5, 1.5], 2.0)
        assert len(p) == 2
        assert p.total_mass == 3.0
        assert p.has_diversity
        assert p.blocks()[1].div == 1.5

    def test_empty(self):
        p = IntervalPartition.empty(0.4)
        assert len(p) == 0 and p.total_mass == 0.0 and not p.has_diversity
        q = IntervalPartition.empty(0.4, with_diversity=True)
        assert q.has_diversity and q.total_diversity == 0.0

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            IntervalPartition([1.0, 0.0])

    def test_rejects_decreasing_marks(self):
        with pytest.raises(ValueError):
            marked([1.0, 1.0], [2.0, 1.0], 3.0)

    def test_rejects_total_below_marks(self):
        with pytest.raises(ValueError):
            marked([1.0], [2.0], 1.0)

    def test_rejects_total_without_marks(self):
        with pytest.raises(ValueError):
            IntervalPartition([1.0], total_diversity=1.0)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            IntervalPartition([1.0], alpha_div=1.0)

    def test_ranked_masses(self):
        p = IntervalPartition([1.0, 3.0, 2.0])
        assert list(p.ranked_masses) == [3.0, 2.0, 1.0]


class TestSerialization:
    def test_round_trip_marked(self):
        p = marked([1.0, 0.25], [0.1, 0.7], 1.3, alpha=0.3)
        q = IntervalPartition.from_json(p.to_json())
        assert q == p

    def test_round_trip_unmarked(self):
        p = IntervalPartition([0.5, 0.5])
        q = IntervalPartition.from_json(p.to_json())
        assert q == p and not q.has_diversity

    def test_schema_keys(self):
        obj = json.loads(marked([1.0], [0.2], 0.9).to_json())
        assert set(obj) == {"alpha_div", "total_diversity", "blocks"}
        assert set(obj["blocks"][0]) == {"mass", "div"}

    def test_null_marks_in_json(self):
        obj = json.loads(IntervalPartition([1.0]).to_json())
        assert obj["total_diversity"] is None
        assert obj["blocks"][0]["div"] is None

    def test_file_round_trip(self, tmp_path):
        p = marked([2.0], [0.4], 0.8)
        path = tmp_path / "part.json"
        p.to_json(str(path))
        assert IntervalPartition.from_json(str(path)) == p


class TestAlgebra:
    def test_concat_identity(self):
        beta = marked([1.0, 2.0], [0.3, 0.6], 1.0)
        out = concat([IntervalPartition.empty(0.5, with_diversity=True), beta])
        assert out == beta

    def test_concat_shifts_marks(self):
        a = marked([1.0], [0.5], 1.0)
        b = marked([2.0], [0.25], 0.75)
        out = concat([a, b])
        assert list(out.masses) == [1.0, 2.0]
        assert list(out.divs) == [0.5, 1.25]
        assert out.total_diversity == 1.75

    def test_concat_drops_marks_when_mixed(self):
        a = marked([1.0], [0.5], 1.0)
        b = IntervalPartition([2.0])
        assert not concat([a, b]).has_diversity

    def test_concat_rejects_mixed_alpha(self):
        with pytest.raises(ValueError):
            concat([IntervalPartition([1.0], alpha_div=0.3),
                    IntervalPartition([1.0], alpha_div=0.5)])

    def test_concat_empty_family(self):
        assert len(concat([], alpha_div=0.5)) == 0
        with pytest.raises(ValueError):
            concat([])

    def test_scale_masses_and_marks(self):
        beta = marked([1.0, 4.0], [1.0, 2.0], 2.0, alpha=0.5)
        out = scale(4.0, beta)
        assert list(out.masses) == [4.0, 16.0]
        assert np.allclose(out.divs, [2.0, 4.0])      # 4**0.5 = 2
        assert out.total_diversity == pytest.approx(4.0)

    def test_scale_composition(self):
        beta = marked([1.0, 0.5], [0.2, 0.9], 1.1, alpha=0.4)
        lhs = scale(2.0, scale(3.0, beta))
        rhs = scale(6.0, beta)
        assert np.allclose(lhs.masses, rhs.masses, rtol=1e-14)
        assert np.allclose(lhs.divs, rhs.divs, rtol=1e-14)

    def test_scale_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            scale(0.0, IntervalPartition([1.0]))

    def test_truncate(self):
        beta = marked([1.0, 0.01, 2.0], [0.1, 0.2, 0.3], 0.5)
        out = truncate(beta, 0.5)
        assert list(out.masses) == [1.0, 2.0]
        assert list(out.divs) == [0.1, 0.3]
        assert out.total_diversity == 0.5


@st.composite
def small_partition(draw, with_marks=True):
    n = draw(st.integers(0, 5))
    masses = draw(st.lists(st.floats(0.01, 10.0), min_size=n, max_size=n))
    if not with_marks:
        return IntervalPartition(masses, alpha_div=0.5)
    marks = sorted(draw(st.lists(st.floats(0.0, 5.0), min_size=n, max_size=n)))
    total = (marks[-1] if n else 0.0) + draw(st.floats(0.0, 2.0))
    return IntervalPartition(masses, divs=marks, total_diversity=total,
                             alpha_div=0.5)


class TestAlgebraProperties:
    @given(small_partition(), small_partition(), small_partition())
    @settings(max_examples=60, deadline=None)
    def test_concat_associative(self, a, b, c):
        lhs = concat([concat([a, b]), c])
        rhs = concat([a, concat([b, c])])
        assert np.array_equal(lhs.masses, rhs.masses)
        assert np.allclose(lhs.divs, rhs.divs, atol=1e-12)
        assert lhs.total_diversity == pytest.approx(rhs.total_diversity)

    @given(small_partition(), st.floats(0.1, 10.0))
    @settings(max_examples=60, deadline=None)
    def test_scale_preserves_structure(self, beta, c):
        out = scale(c, beta)
        assert len(out) == len(beta)
        assert out.total_mass == pytest.approx(c * beta.total_mass)
        assert out.total_diversity == pytest.approx(
            c ** 0.5 * beta.total_diversity)


class TestDiversityEstimate:
    def test_finite_partition_vanishes(self):
        # grid strictly below the smallest block: count is constant, the
        # regression fit is exact and its intercept is zero
        beta = IntervalPartition([1.0, 2.0, 3.0], alpha_div=0.5)
        grid = np.geomspace(0.5, 1e-4, 30)
        est = diversity_estimate(beta, h_grid=grid)
        assert abs(est.value) < 1e-9
        assert est.dispersion < 1e-9

    def test_empty(self):
        est = diversity_estimate(IntervalPartition.empty(0.5))
        assert est.value == 0.0

    def test_narrow_grid_rejected(self):
        beta = IntervalPartition([1.0, 2.0])
        with pytest.raises(ValueError, match="bandwidth"):
            diversity_estimate(beta, h_grid=np.geomspace(1.0, 0.5, 5))

    def test_t_restriction(self):
        beta = IntervalPartition([1.0, 5.0], alpha_div=0.5)
        grid = np.geomspace(0.4, 1e-4, 25)
        full = diversity_estimate(beta, h_grid=grid)
        first = diversity_estimate(beta, t=1.5, h_grid=grid)
        # both finite-partition limits are zero, but slopes differ; just
        # confirm the restriction drops the later block from the counts
        assert abs(first.value) < 1e-9
        assert abs(full.value) < 1e-9


class TestStableSampler:
    def test_structure(self):
        rng = make_rng(7, "stable-structure")
        beta = sample_stable_ip(0.5, 2.0, 1e-3, rng)
        assert beta.alpha_div == 0.5
        assert beta.total_diversity == 2.0
        assert beta.masses.min() >= 1e-3
        assert np.all(np.diff(beta.divs) >= 0)
        assert beta.divs.min() >= 0 and beta.divs.max() <= 2.0

    def test_zero_horizon(self):
        beta = sample_stable_ip(0.5, 0.0, 1e-3, make_rng(7, "stable-zero"))
        assert len(beta) == 0 and beta.has_diversity

    def test_block_count_mean(self):
        # frozen-oracle check: mean count over replicates within 4 sd

        T, cutoff, alpha, reps = 1.0, 1e-2, 0.5, 200
        target = stable_ip_expected_count(alpha, T, cutoff)
        counts = [len(sample_stable_ip(alpha, T, cutoff,
                                       make_rng(11, "stable-count", r)))
                  for r in range(reps)]
        se = np.sqrt(target / reps)   # Poisson variance = mean
        assert abs(np.mean(counts) - target) < 4 * se

    def test_windowed_mass_mean(self):
        T, cutoff, alpha, K, reps = 1.0, 1e-2, 0.5, 10.0, 200
        target = stable_ip_windowed_mass(alpha, T, cutoff, K)
        vals = []
        for r in range(reps):
            beta = sample_stable_ip(alpha, T, cutoff,
                                    make_rng(13, "stable-mass", r))
            vals.append(beta.masses[beta.masses < K].sum())
        se = np.std(vals, ddof=1) / np.sqrt(reps)
        assert abs(np.mean(vals) - target) < 4 * se

    def test_size_law_kolmogorov(self):
        # (size/cutoff)**(-alpha) should be uniform on (0,1)
        from scipy.stats import kstest
        rng = make_rng(17, "stable-sizes")
        beta = sample_stable_ip(0.6, 5.0, 1e-3, rng)
        u = (beta.masses / 1e-3) ** -0.6
        assert kstest(u, "uniform").pvalue > 1e-3

    def test_invalid_args(self):
        rng = make_rng(1, "stable-invalid")
        with pytest.raises(ValueError):
            sample_stable_ip(1.5, 1.0, 1e-3, rng)
        with pytest.raises(ValueError):
            sample_stable_ip(0.5, 1.0, 0.0, rng)


class TestCorrespondence:
    def test_valid(self):
        c = Correspondence([(0, 1), (2, 3)])
        assert len(c) == 2 and list(c) == [(0, 1), (2, 3)]

    def test_rejects_order_violation(self):
        with pytest.raises(ValueError):
            Correspondence([(0, 3), (2, 1)])


class TestDistancesBasic:
    def test_identical_is_zero(self):
        beta = marked([1.0, 2.0, 0.5], [0.1, 0.4, 0.9], 1.2)
        assert dist_alpha(beta, beta) == 0.0
        assert dist_hausdorff(beta, beta) == 0.0

    def test_empty_vs_partition(self):
        beta = marked([1.0, 2.0], [0.3, 0.4], 0.9)
        empty = IntervalPartition.empty(0.5, with_diversity=True)
        assert dist_hausdorff(empty, beta) == pytest.approx(3.0)
        assert dist_alpha(empty, beta) == pytest.approx(3.0)

    def test_single_block_mass_gap(self):
        a = marked([1.0], [0.2], 0.2)
        b = marked([1.5], [0.2], 0.2)
        assert dist_alpha(a, b) == pytest.approx(0.5)

    def test_diversity_gap_dominates(self):
        a = marked([1.0], [0.0], 5.0)
        b = marked([1.0], [0.0], 1.0)
        assert dist_alpha(a, b) == pytest.approx(4.0)

    def test_hausdorff_ignores_marks(self):
        a = marked([1.0], [0.0], 5.0)
        b = marked([1.0], [0.0], 1.0)
        assert dist_hausdorff(a, b) == 0.0

    def test_alpha_requires_marks(self):
        with pytest.raises(ValueError):
            dist_alpha(IntervalPartition([1.0]), IntervalPartition([1.0]))

    def test_cutoff_truncates_first(self):
        a = marked([1.0, 1e-4], [0.1, 0.2], 0.3)
        b = marked([1.0], [0.1], 0.3)
        assert dist_alpha(a, b, cutoff=1e-3) == 0.0
