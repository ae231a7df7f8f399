"""Tests for the Monte Carlo verification harness."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest, norm

from skewersim.spindles import DiffusionParams
from skewersim.scaffold import sample_prm
from skewersim.skewer import skewer
from skewersim.ipcore import diversity_estimate
from skewersim import verify as V
import helpers
from helpers import make_rng


class TestPlumbing:
    def test_report_round_trip(self):
        r = V.TestReport("t", 10, 1.0, 1.1, 0.05, True, seed=3, runtime=0.1,
                         k=3.0, allowance=0.01, blocking=False,
                         details={"a": 1})
        d = r.to_dict()
        assert d["pass"] is True and d["n_samples"] == 10
        assert V.TestReport.from_dict(d).to_dict() == d

    def test_json_deterministic(self):
        r = V.TestReport("t", 10, 1.0, 1.1, 0.05, True)
        s1 = V.reports_to_json([r])
        s2 = V.reports_to_json([V.TestReport.from_dict(json.loads(s1)[0])])
        assert s1 == s2

    def test_exit_codes(self):
        ok = V.TestReport("a", 1, 0, 0, 1, True)
        bad = V.TestReport("b", 1, 9, 0, 1, False)
        soft = V.TestReport("c", 1, 9, 0, 1, False, blocking=False)
        assert V.suite_exit_code([ok]) == 0
        assert V.suite_exit_code([ok, soft]) == 0
        assert V.suite_exit_code([ok, bad]) == 4

    def test_stream_rng_deterministic(self):
        a = V.stream_rng(5, "x").random(4)
        b = V.stream_rng(5, "x").random(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, V.stream_rng(5, "y").random(4))
        assert not np.array_equal(a, V.stream_rng(5, "x", 1).random(4))
        assert not np.array_equal(a, V.stream_rng(6, "x").random(4))

    def test_bonferroni(self):
        assert V.bonferroni_k(3.0, 1) == 3.0
        k16 = V.bonferroni_k(3.0, 16)
        assert k16 > 3.0
        # the widened rule spends the same family error budget
        assert np.isclose(norm.sf(k16) * 16, norm.sf(3.0), rtol=1e-10)

    @given(st.integers(40, 10 ** 6))
    @settings(max_examples=50, deadline=None)
    def test_batch_sizes(self, n):
        sizes = V._batch_sizes(n)
        assert sum(sizes) == n
        assert len(sizes) == 40
        assert max(sizes) - min(sizes) <= 1


class TestWalkKernels:
    def test_supremum_scale_invariance(self):
        # drift and jump draws are linear in the scale, so rerunning the
        # same stream with all lengths multiplied by c scales the paths
        for c in (0.25, 7.0):
            v0 = np.full(500, 0.6)
            s1, c1 = V._walk_supremum(v0, 1.0, 0.5, 5e-3, make_rng(1, "ws"))
            s2, c2 = V._walk_supremum(c * v0, c, 0.5, c * 5e-3,
                                      make_rng(1, "ws"))
            assert np.array_equal(c1, c2)
            f = np.isfinite(s1)
            assert np.allclose(s2[f], c * s1[f], rtol=1e-12)
            assert np.all(np.isinf(s2[~f]))

    def test_exit_law(self):
        # absorption before crossing has probability (1 - x/y)^alpha in the
        # fine-cutoff limit; 5e-3 is close enough for a 5 sigma band
        rng = make_rng(2, "walk-exit")
        _, crossed = V._walk_supremum(np.full(20000, 0.5), 1.0, 0.5, 5e-3,
                                      rng)
        p = 1.0 - crossed.mean()
        assert abs(p - math.sqrt(0.5)) < 5 * 0.5 / math.sqrt(20000) + 0.01

    def test_straddler_pool_invariants(self):
        u, z, tiered, failed = V._straddler_pool(30000, 0.5,
                                                 make_rng(3, "pool"))
        assert failed == 0
        assert np.all(u > 0) and np.all(u <= z)
        assert 0.0 < tiered.mean() < 0.05

    def test_straddler_pool_trigger_insensitive(self):
        # the adaptive rescaling must not move the crossing-value law:
        # compare the fitted exponent at two very different trigger depths
        def psi(trigger, rng):
            u, z, _, _ = V._straddler_pool(40000, 0.5, rng,
                                           deep_trigger=trigger,
                                           deep_reset=trigger / 10.0,
                                           refine_trigger=0.03 * trigger,
                                           refine_reset=0.3 * trigger)
            val = 2.0 * u * (z - u) / z * rng.gamma(1.5, 1.0, u.size)
            batch = np.exp(-val).reshape(40, -1).mean(axis=1)
            p = -np.log(batch)
            return p.mean(), p.std(ddof=1) / math.sqrt(40)

    # separate streams, so allow sqrt(2) times 5 combined sigma
        a, sa = psi(600.0, make_rng(4, "pool-a"))
        b, sb = psi(3000.0, make_rng(4, "pool-b"))
        assert abs(a - b) < 5 * math.hypot(sa, sb)

    def test_clade_scan_straddler_validity(self):
        rng = make_rng(5, "scan")
        v0 = rng.exponential(1.0, 2000) + 0.05
        ids, u, z = V._clade_scan(v0, 0.6, 0.5, 5e-3, rng)
        assert np.all((ids >= 0) & (ids < 2000))
        assert np.all(u > 0) and np.all(u <= z)
        # a clade whose scaffold never reaches the level cannot straddle it
        assert v0[np.unique(ids)].size <= 2000

    def test_clade_scan_trigger_insensitive(self):
        def mass_rate(trigger, rng):
            v0 = np.full(3000, 1.2)
            ids, u, z = V._clade_scan(v0, 0.6, 0.5, 5e-3, rng,
                                      deep_trigger=trigger,
                                      deep_reset=trigger / 10.0)
            per = np.bincount(ids, 2.0 * u * (z - u) / z, 3000)
            return per.mean(), per.std(ddof=1) / math.sqrt(3000)

        a, sa = mass_rate(900.0, make_rng(6, "scan-a"))
        b, sb = mass_rate(3000.0, make_rng(6, "scan-b"))
        assert abs(a - b) < 5 * math.hypot(sa, sb)

    def test_exit_bias_shrinks_with_cutoff(self):
        # degenerate start x = y: the absorption probability is a pure
        # cutoff artifact of order cutoff^alpha and must halve per 4x
        def p_die(cutoff, rng):
            _, crossed = V._walk_supremum(np.full(30000, 1.0), 1.0, 0.5,
                                          cutoff, rng)
            return 1.0 - crossed.mean()

        coarse = p_die(8e-3, make_rng(7, "bias-a"))
        fine = p_die(2e-3, make_rng(7, "bias-b"))
        assert fine < 0.75 * coarse
        assert fine > 0.25 * coarse


class TestEulerKernels:
    def test_snapshot_consistency(self):
        rng = make_rng(8, "snap")
        vals, t = V._besq_snapshots(1.0, -1.0, [0.5, 1.0], 1e-3, 4000, rng,
                                    tail_alpha=0.5)
        for i, y in enumerate((0.5, 1.0)):
            assert np.array_equal(vals[i] > 0.0, t > y)

    def test_absorption_matches_inverse_gamma(self):
        rng = make_rng(9, "snap-law")
        _, t = V._besq_snapshots(1.0, -1.0, [1.0], 1e-3, 4000, rng,
                                 tail_alpha=0.5)
        res = kstest(t, lambda s: helpers.lifetime_cdf(s, 1.0, 0.5))
        assert res.statistic < 0.05

    def test_besq0_martingale(self):
        rng = make_rng(10, "snap-mart")
        vals, _ = V._besq_snapshots(1.0, 0.0, [0.5], 1e-3, 8000, rng)
        se = vals[0].std(ddof=1) / math.sqrt(8000)
        assert abs(vals[0].mean() - 1.0) < 4 * se + 0.01


class TestCrossChecks:
    def test_level_value_transform(self):
        # the conditioned spindle value at a fixed interior offset has the
        # Laplace transform of a Gamma(2+alpha) variable at the known scale
        from skewersim.spindles import sample_level_value
        params = DiffusionParams(0.5)
        rng = make_rng(11, "lvl")
        zeta, h = 2.0, 0.7
        m = sample_level_value(np.full(200000, zeta), np.full(200000, h),
                               params, rng)
        scale = 2.0 * h * (zeta - h) / zeta
        for lam in (0.5, 2.0):
            got = np.exp(-lam * m).mean()
            want = (1.0 + lam * scale) ** -2.5
            assert abs(got - want) < 5 * np.exp(-lam * m).std() / math.sqrt(200000)

    def test_skewer_diversity_matches_local_time(self):
        # end-to-end: read partitions off sampled marked processes and check
        # the mass-only estimator against the exact local-time marks carried
        # by the skewer (coarse cutoff, so the tolerance is loose)
        params = DiffusionParams(0.5)
        h_grid = np.geomspace(2.0, 0.02, 25)
        ratios = []
        for rep in range(8):
            rng = make_rng(12, "skewer-divcheck", rep)
            pp = sample_prm(params, cutoff=3e-2, horizon=200.0, rng=rng)
            beta = skewer(pp, 0.0).partition
            if beta.total_diversity < 2.0:
                continue
            est = diversity_estimate(beta, h_grid=h_grid).value
            ratios.append(est / beta.total_diversity)
        assert len(ratios) >= 4
        assert 0.6 < np.median(ratios) < 1.5


class TestOperations:
    def test_reports_deterministic_and_thread_invariant(self):
        def run(threads):
            return V.test_exit_probability(
                0.5, 0.5, 1.0, 2000, V.stream_rng(3, "exit-det"),
                threads=threads, name="exit-det", seed_label=3).to_dict()

        a, b, c = run(1), run(1), run(3)
        for d in (b, c):
            d["runtime"] = a["runtime"]
        assert a == b == c

    def test_lifetime_rejects_tiny_n(self):
        with pytest.raises(ValueError):
            V.test_lifetime_law(1.0, 0.5, [0.5], 100, V.stream_rng(1, "x"))

    def test_lifetime_smoke(self):
        r = V.test_lifetime_law(1.0, 0.5, [0.5, 1.0], 1000,
                                V.stream_rng(4, "lt-smoke"), threads=2)
        assert r.passed
        assert len(r.details["cells"]) == 2
        assert r.n_samples == 1000

    def test_absorption_smoke(self):
        r = V.test_absorption_time(0.5, 1.0, 1000, 1e-3,
                                   V.stream_rng(5, "ab-smoke"), threads=2)
        assert r.passed
        assert r.statistic < 0.06
        assert r.details["se_convention"].startswith("band/k")

    def test_aggregate_smoke(self):
        r = V.test_aggregate_mass_subordinator(
            0.5, 1.0, [1.0], [0.5, 2.0], 20000,
            V.stream_rng(6, "agg-smoke"), threads=2)
        assert r.passed
        assert r.details["unresolved"] == 0

    def test_total_mass_smoke(self):
        r = V.test_total_mass_besq0(1.0, 0.5, [0.5], [1.0], 1000,
                                    V.stream_rng(7, "tm-smoke"), dt=2e-3,
                                    threads=2)
        assert not r.blocking
        assert abs(r.statistic - r.reference_value) < 0.05

    def test_diversity_smoke(self):
        r = V.test_diversity_localtime(0.5, 1.0, 20,
                                       V.stream_rng(8, "dv-smoke"),
                                       threads=2)
        assert r.passed
        assert r.statistic < 0.05

    def test_exit_control_detected(self):
        r = V.test_exit_probability(0.5, 0.5, 1.0, 4000,
                                    V.stream_rng(9, "exit-ctl"),
                                    reference_alpha=0.6, m_cells=1)
        assert not r.passed

    def test_shuffle_control_detected(self):
        r = V.test_diversity_localtime(0.5, 1.0, 30,
                                       V.stream_rng(10, "dv-ctl"),
                                       shuffle=True)
        assert not r.passed
        assert r.statistic > 0.1


class TestSuites:
    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            V.run_suite("no-such-test", master_seed=1)

    def test_prefix_selection_runs_one(self):
        reps = V.run_suite("diversity-local-time", master_seed=1)
        assert [r.name for r in reps] == ["diversity-local-time"]
        assert reps[0].passed

    def test_controls_all_blocking(self):
        names = [s[0] for s in V._control_specs()]
        assert len(names) == len(set(names)) == 6
        for name, fn, kw in V._control_specs():
            assert name.endswith("-control")

    def test_healthy_spec_names_unique(self):
        for suite in ("all", "fast", "smoke"):
            scale = {"all": 1.0, "fast": 0.25, "smoke": 0.04}[suite]
            names = [s[0] for s in V._healthy_specs(scale)]
            assert len(names) == len(set(names)) == 16
