import io
import itertools

import numpy as np
import pytest

from dyadic_tte.clustering import Clustering
from dyadic_tte.designs import (
    Assignment,
    DesignError,
    FullBernoulli,
    SubPopBernoulli,
    TwoStageCluster,
    marginals,
    read_assignment,
    substream,
    write_assignment,
)

DRAWS = 100_000


def draws(design, n, reps, seed=0):
    rng = np.random.default_rng(seed)
    out = [design.draw(n, rng) for _ in range(reps)]
    return np.array([a.V for a in out]), np.array([a.W for a in out])


def within_se(samples, target, k=4.0):
    se = np.sqrt(target * (1 - target) / samples.size)
    return abs(samples.mean() - target) <= k * se


class TestDraws:
    def test_full_pi_one(self):
        a = FullBernoulli(1.0).draw(5, np.random.default_rng(0))
        np.testing.assert_array_equal(a.V, 1)
        np.testing.assert_array_equal(a.W, 1)

    @pytest.mark.parametrize("p, pi", [(0.5, 0.5), (0.2, 0.7), (1.0, 0.3)])
    def test_subpop_marginal(self, p, pi):
        # units are independent, so one wide draw stands in for many narrow ones
        a = SubPopBernoulli(p, pi).draw(DRAWS, np.random.default_rng(1))
        assert within_se(a.W.astype(float), p * pi, k=3.0)
        assert within_se(a.V.astype(float), p, k=3.0)

    def test_out_of_experiment_never_treated(self):
        V, W = draws(SubPopBernoulli(0.3, 0.9), 20, 500)
        assert not np.any((V == 0) & (W == 1))

    def test_twostage_single_cluster(self):
        c = Clustering(np.zeros(6, int))
        V, W = draws(TwoStageCluster(0.4, 0.5, c), 6, 4000)
        # V is all-or-nothing; W only inside
        assert set(V.sum(1).tolist()) <= {0, 6}
        assert not np.any(W[V.sum(1) == 0])
        assert within_se((V[:, 0] == 1).astype(float), 0.4)

    def test_twostage_v_constant_within_clusters(self):
        c = Clustering(np.array([0, 0, 1, 1, 1, 2]))
        V, _ = draws(TwoStageCluster(0.5, 0.5, c), 6, 500)
        for k in range(3):
            members = V[:, c.assignment == k]
            assert np.all(members == members[:, :1])

    def test_twostage_marginals(self):
        c = Clustering(np.array([0, 0, 1, 1]))
        V, W = draws(TwoStageCluster(0.5, 0.5, c), 4, DRAWS // 4, seed=2)
        assert within_se(W.ravel().astype(float), 0.25)
        same = (W[:, 0] * W[:, 1]).astype(float)
        diff = (W[:, 0] * W[:, 2]).astype(float)
        assert within_se(same, 0.125)
        assert within_se(diff, 0.0625)

    def test_fixed_fraction(self):
        c = Clustering(np.arange(10))
        V, _ = draws(TwoStageCluster(0.3, 0.5, c, "fixed-fraction"), 10, 200)
        np.testing.assert_array_equal(V.sum(1), 3)

    def test_clustering_size_mismatch(self):
        with pytest.raises(DesignError):
            TwoStageCluster(0.5, 0.5, Clustering(np.zeros(3, int))).draw(4, np.random.default_rng(0))

    @pytest.mark.parametrize("make", [
        lambda: FullBernoulli(1.5),
        lambda: SubPopBernoulli(0.0, 0.5),
        lambda: SubPopBernoulli(0.5, -0.1),
        lambda: TwoStageCluster(0.5, 0.5, Clustering(np.zeros(2, int)), "stratified"),
    ])
    def test_invalid(self, make):
        with pytest.raises(DesignError):
            make()


class TestMarginals:
    def test_full(self):
        m = marginals(FullBernoulli(0.5))
        assert (m.p_w, m.pair_diff) == (0.5, 0.25)

    def test_subpop(self):
        m = marginals(SubPopBernoulli(0.5, 0.5))
        assert (m.p_w, m.pair_diff) == (0.25, 0.0625)

    def test_twostage_same_cluster_by_enumeration(self):
        # one cluster, two units: cluster in/out × the four (W_i, W_j) patterns
        p, pi = 0.5, 0.5
        total = 0.0
        for v in (0, 1):
            pv = p if v else 1 - p
            for wi, wj in itertools.product((0, 1), repeat=2):
                if not v and (wi or wj):
                    continue
                pw = (pi if wi else 1 - pi) * (pi if wj else 1 - pi) if v else 1.0
                total += pv * pw * v * wi * wj
        m = marginals(TwoStageCluster(p, pi, Clustering(np.zeros(2, int))))
        assert m.pair_same == pytest.approx(total) == pytest.approx(0.125)


class TestAssignment:
    def test_rejects_treated_outside(self):
        with pytest.raises(DesignError):
            Assignment(np.array([0, 1]), np.array([1, 0]))

    def test_roundtrip(self):
        a = SubPopBernoulli(0.5, 0.5).draw(30, np.random.default_rng(4))
        buf = io.StringIO()
        write_assignment(a, buf)
        b = read_assignment(io.StringIO(buf.getvalue()))
        np.testing.assert_array_equal(a.V, b.V)
        np.testing.assert_array_equal(a.W, b.W)

    def test_substream_reproducible_and_distinct(self):
        a = substream(1, 0, 5).random(4)
        np.testing.assert_array_equal(a, substream(1, 0, 5).random(4))
        assert not np.array_equal(a, substream(1, 0, 6).random(4))
        assert not np.array_equal(a, substream(2, 0, 5).random(4))
