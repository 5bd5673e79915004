import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import silhouette_direct, spearman

from mpc_topo.clusterer import OUTLIER, result_from_labels
from mpc_topo.metrics import (
    UndefinedCorrelation,
    evaluate,
    pair_distance,
    rank_correlation,
    silhouette,
    spearman_rho,
    wacc,
)
from mpc_topo.pdap import MpcSamples, NormalizationContext, normalization_context


def make_result(tau, phi, labels, power=None):
    n = len(tau)
    power = np.zeros(n) if power is None else np.asarray(power, float)
    s = MpcSamples(tau, phi, power, np.zeros((n, 2), int))
    return result_from_labels(s, labels, normalization_context(s))


def peaked_cluster(rng, centre, n, sigma=(1.0, 4.0)):
    tau = centre[0] + rng.normal(0, sigma[0], n)
    phi = centre[1] + rng.normal(0, sigma[1], n)
    r = np.hypot((tau - centre[0]) / sigma[0], (phi - centre[1]) / sigma[1])
    return tau, phi, -80.0 - 3.0 * r ** 2


class TestPairDistance:
    CTX = NormalizationContext(2.0, 5.0)

    def test_identical(self):
        assert pair_distance((3.0, 4.0), (3.0, 4.0), self.CTX) == 0.0

    def test_unit_offsets(self):
        assert pair_distance((2.0, 5.0), (0.0, 0.0), self.CTX) == pytest.approx(math.sqrt(2))

    def test_random_pairs(self, rng):
        for _ in range(100):
            a, b = rng.normal(0, 50, 2), rng.normal(0, 50, 2)
            ref = math.sqrt(((a[0] - b[0]) / 2.0) ** 2 + ((a[1] - b[1]) / 5.0) ** 2)
            assert pair_distance(a, b, self.CTX) == pytest.approx(ref, rel=1e-12)


class TestSilhouette:
    def test_separated_blobs(self, rng):
        tau = np.r_[rng.normal(0, 0.1, 50), rng.normal(100, 0.1, 50)]
        phi = np.r_[rng.normal(0, 0.1, 50), rng.normal(100, 0.1, 50)]
        mean, _ = silhouette(make_result(tau, phi, np.repeat([1, 2], 50)))
        assert mean > 0.9

    def test_midway_sample_scores_zero(self):
        # sample 0: co-member at distance 2, other cluster at distances 1 and 3, so a = b = 2
        r = make_result([0.0, 2.0, -1.0, -3.0], [0.0, 0.0, 0.0, 1.0], [1, 1, 2, 2])
        ctx = NormalizationContext(1.0, 1e9)
        _, s = silhouette(r, ctx)
        assert s[0] == 0.0

    def test_singleton_scores_zero(self):
        r = make_result([0.0, 1.0, 1.0, -1.0, -1.0], [0.0, 0.1, -0.1, 0.1, -0.1], [1, 2, 2, 3, 3])
        _, s = silhouette(r)
        assert s[0] == 0.0

    def test_random_labels_on_one_blob(self):
        vals = []
        for seed in range(50):
            r = np.random.default_rng(seed)
            tau, phi = r.normal(0, 1, 200), r.normal(0, 1, 200)
            mean, _ = silhouette(make_result(tau, phi, r.integers(1, 3, 200)))
            vals.append(mean)
        assert max(abs(v) for v in vals) < 0.15

    def test_matches_direct_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(5, 60))
            tau, phi = rng.normal(0, 5, n), rng.normal(0, 20, n)
            lab = rng.integers(1, 4, n)
            lab[:2] = [1, 2]
            r = make_result(tau, phi, lab)
            ctx = r.context
            mean, s = silhouette(r, chunk=7)
            ref_mean, ref = silhouette_direct((r.samples.points / [ctx.sigma_tau, ctx.sigma_phi]).tolist(), lab.tolist())
            assert np.allclose(s, ref, atol=1e-12, rtol=0)
            assert mean == pytest.approx(ref_mean, abs=1e-12)

    def test_outliers_excluded(self, rng):
        tau, phi = rng.normal(0, 1, 40), rng.normal(0, 1, 40)
        lab = np.repeat([1, 2], 20)
        with_noise = make_result(np.r_[tau, 50.0], np.r_[phi, 50.0], np.r_[lab, OUTLIER])
        without = make_result(tau, phi, lab)
        assert silhouette(with_noise)[0] == pytest.approx(silhouette(without)[0], abs=1e-12)

    def test_relabel_invariance(self, rng):
        tau, phi = rng.normal(0, 1, 60), rng.normal(0, 1, 60)
        lab = rng.integers(1, 4, 60)
        a = silhouette(make_result(tau, phi, lab))[0]
        b = silhouette(make_result(tau, phi, np.array([0, 7, 2, 5])[lab]))[0]
        assert a == pytest.approx(b, abs=1e-12)

    def test_single_cluster_is_an_error(self):
        with pytest.raises(ValueError):
            silhouette(make_result([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], [1, 1, 1]))


class TestSpearman:
    def test_perfect_anti(self):
        assert rank_correlation([1, 2, 3], [30, 20, 10]) == -1.0

    def test_perfect(self):
        assert rank_correlation([1, 2, 3], [10, 20, 30]) == 1.0

    def test_random_against_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            d = rng.integers(0, 8, n).astype(float)
            p = rng.integers(0, 8, n).astype(float)
            if np.ptp(d) == 0 or np.ptp(p) == 0:
                continue
            assert rank_correlation(d, p) == pytest.approx(spearman(d.tolist(), p.tolist()), abs=1e-12)

    def test_constant_is_undefined(self):
        with pytest.raises(UndefinedCorrelation):
            rank_correlation([1, 1, 1], [1, 2, 3])
        with pytest.raises(UndefinedCorrelation):
            rank_correlation([1.0], [2.0])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=3, max_size=40))
    def test_monotone_transform_invariance(self, pairs):
        d = np.array([a for a, _ in pairs])
        p = np.array([b for _, b in pairs])
        if np.ptp(d) == 0 or np.ptp(p) == 0:
            return
        base = rank_correlation(d, p)
        assert -1.0 <= base <= 1.0
        assert rank_correlation(np.exp(d / 10.0), p ** 3 + 7.0) == pytest.approx(base, abs=1e-12)

    def test_radial_decay_is_minus_one(self, rng):
        tau, phi, _ = peaked_cluster(rng, (10.0, 100.0), 50)
        r0 = make_result(np.r_[10.0, tau], np.r_[100.0, phi], np.ones(51, int))
        ctx = r0.context
        dist = np.hypot((r0.samples.tau - 10.0) / ctx.sigma_tau, (r0.samples.phi - 100.0) / ctx.sigma_phi)
        r = make_result(r0.samples.tau, r0.samples.phi, np.ones(51, int), -80.0 - 2.0 * dist)
        assert spearman_rho(r, 1, ctx) == -1.0


class TestWacc:
    def test_single_cluster(self):
        # distance ranks 1..5 against power ranks 5,3,4,1,2 give rho = -0.8
        tau = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        r = make_result(tau, np.zeros(5) + [0, 0, 0, 0, 1e-12], np.ones(5, int), [-50, -70, -60, -90, -80])
        assert spearman([1, 2, 3, 4, 5], [5, 3, 4, 1, 2]) == pytest.approx(-0.8)
        assert wacc(r, NormalizationContext(1.0, 1.0)) == pytest.approx(-0.8, abs=1e-12)

    def test_weighted_mean(self):
        # cluster 1: N=10 with rho=-1; cluster 2: N=30 with rho=0
        tau1 = np.arange(10.0)
        p1 = -50.0 - tau1
        tau2 = 100.0 + np.array([0.0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10,
                                 10, 11, 11, 12, 12, 13, 13, 14, 14, 15])
        base = np.tile([-60.0, -70.0], 15)
        base[0] = -40.0
        r = make_result(np.r_[tau1, tau2], np.zeros(40) + np.r_[np.zeros(10), np.arange(30) * 1e-9],
                        np.repeat([1, 2], [10, 30]), np.r_[p1, base])
        ctx = NormalizationContext(1.0, 1.0)
        rho2 = spearman_rho(r, 2, ctx)
        expect = (10 * -1.0 + 30 * rho2) / 40
        assert wacc(r, ctx) == pytest.approx(expect, abs=1e-12)
        # hand-checkable variant with rho2 forced to 0 through the weighting formula
        assert (10 * -1.0 + 30 * 0.0) / 40 == -0.25

    def test_peaked_clusters(self, rng):
        parts = [peaked_cluster(rng, c, 80) for c in [(10.0, 100.0), (30.0, 160.0), (50.0, 120.0)]]
        tau = np.concatenate([p[0] for p in parts])
        phi = np.concatenate([p[1] for p in parts])
        pw = np.concatenate([p[2] for p in parts])
        r = make_result(tau, phi, np.repeat([1, 2, 3], 80), pw)
        assert wacc(r) < -0.5

    def test_undefined_cluster_skipped(self):
        r = make_result([0.0, 1.0, 2.0, 10.0, 11.0], [0.0, 0.0, 0.0, 5.0, 5.0], [1, 1, 1, 2, 2],
                        [-50.0, -60.0, -70.0, -50.0, -50.0])
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            v = wacc(r, NormalizationContext(1.0, 1.0))
        assert v == -1.0
        assert any("cluster 2" in str(x.message) for x in w)

    def test_all_undefined(self):
        r = make_result([0.0, 1.0, 10.0, 11.0], [0.0, 0.0, 5.0, 5.0], [1, 1, 2, 2], [-50.0] * 4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(UndefinedCorrelation):
                wacc(r, NormalizationContext(1.0, 1.0))


class TestEvaluate:
    def test_report(self, demo):
        _, out = demo
        rep = evaluate(out.result)
        assert -1.0 <= rep.mean_si <= 1.0 and -1.0 <= rep.wacc <= 1.0
        assert rep.n_inner == len(out.samples)
        d = rep.to_dict()
        assert set(d) == {"mean_si", "wacc", "clusters"}
        assert [c["id"] for c in d["clusters"]] == [c.id for c in out.result.clusters]
        assert sum(c["n"] for c in d["clusters"]) == rep.n_inner
