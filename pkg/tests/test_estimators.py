import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph, random_params
from dyadic_tte.designs import Assignment, FullBernoulli, SubPopBernoulli
from dyadic_tte.dyadic_model import outcomes
from dyadic_tte.estimators import (
    DegenerateGroupError,
    diff_in_means,
    estimate_batch,
    ht,
    ht_diffusion,
    ht_total,
    ht_upstream,
    report,
)
from dyadic_tte.harness import OutcomeOperator

FULL_10 = Assignment(np.array([1, 1]), np.array([1, 0]))


class TestHT:
    def test_upstream_two_node(self):
        assert ht_upstream(np.array([0.0, 1.5]), FULL_10, 1.0, 0.5) == pytest.approx(-1.5)

    def test_diffusion_two_node(self):
        assert ht_diffusion(np.array([1.5, 0.0]), FULL_10, 1.0, 0.5) == pytest.approx(1.5)

    def test_diffusion_subpop(self):
        a = Assignment(np.array([1, 0]), np.array([1, 0]))
        assert ht_diffusion(np.array([1.5, 0.0]), a, 0.5, 0.5) == pytest.approx(3.0)

    def test_zero_outcomes(self):
        assert ht_upstream(np.zeros(2), FULL_10, 1.0, 0.5) == 0.0
        assert ht_diffusion(np.zeros(2), FULL_10, 1.0, 0.5) == 0.0

    def test_total_examples(self, two_node):
        g, params = two_node
        out = outcomes(g, params, FULL_10.W)
        assert ht_total(out.Y, out.D, FULL_10, 1.0, 0.5) == pytest.approx(0.0)
        both = Assignment(np.array([1, 1]), np.array([1, 1]))
        out = outcomes(g, params, both.W)
        assert ht_total(out.Y, out.D, both, 1.0, 0.5) == pytest.approx(6.0)

    def test_average_over_four_assignments(self, two_node):
        g, params = two_node
        vals = []
        for w in itertools.product((0, 1), repeat=2):
            a = Assignment(np.ones(2), np.array(w))
            out = outcomes(g, params, a.W)
            vals.append(ht_total(out.Y, out.D, a, 1.0, 0.5))
        assert np.mean(vals) == pytest.approx(1.0)

    @pytest.mark.parametrize("pi", [0.0, 1.0, -0.2])
    def test_bad_pi(self, pi):
        with pytest.raises(ValueError):
            ht(np.ones(2), np.ones(2), np.ones(2), 1.0, pi)

    def test_p_one_reduces_to_full(self, rng):
        x = rng.normal(size=20)
        W = rng.integers(0, 2, 20)
        expected = (np.sum(W * x) / 0.3 - np.sum((1 - W) * x) / 0.7) / 20
        assert ht(x, np.ones(20), W, 1.0, 0.3) == pytest.approx(expected, abs=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3), st.integers(0, 2**31))
    def test_scale_equivariance(self, c, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=10)
        V = rng.integers(0, 2, 10)
        W = V * rng.integers(0, 2, 10)
        assert ht(c * x, V, W, 0.6, 0.4) == pytest.approx(c * ht(x, V, W, 0.6, 0.4), rel=1e-12, abs=1e-12)

    def test_total_is_ht_of_sum(self, rng):
        for _ in range(50):
            g = random_graph(rng, 8, 20)
            params = random_params(rng, g.n_edges)
            a = SubPopBernoulli(0.6, 0.4).draw(g.n, rng)
            out = outcomes(g, params, a.W)
            lhs = ht_total(out.Y, out.D, a, 0.6, 0.4)
            assert lhs == pytest.approx(ht(out.Y + out.D, a.V, a.W, 0.6, 0.4), abs=1e-12)

    def test_batch_matches_scalar(self, rng):
        Y = rng.normal(size=(7, 9))
        V = rng.integers(0, 2, (7, 9))
        W = V * rng.integers(0, 2, (7, 9))
        batch = ht(Y, V, W, 0.5, 0.5)
        for r in range(7):
            assert batch[r] == ht(Y[r], V[r], W[r], 0.5, 0.5)


class TestDiffInMeans:
    def test_two_node(self):
        assert diff_in_means(np.array([0.0, 1.5]), FULL_10) == -1.5

    def test_constant(self):
        a = Assignment(np.ones(4), np.array([1, 0, 1, 0]))
        assert diff_in_means(np.full(4, 2.5), a) == 0.0

    def test_all_treated(self):
        with pytest.raises(DegenerateGroupError):
            diff_in_means(np.zeros(2), Assignment(np.ones(2), np.ones(2)))

    def test_ignores_out_of_experiment(self):
        a = Assignment(np.array([1, 1, 0]), np.array([1, 0, 0]))
        assert diff_in_means(np.array([3.0, 1.0, 100.0]), a) == 2.0


class TestBatch:
    def test_degenerate_flags(self):
        r = estimate_batch(np.ones((2, 3)), np.ones((2, 3)), np.ones((2, 3)),
                           np.array([[1, 1, 1], [1, 0, 0]]), 1.0, 0.5)
        assert r["degenerate"].tolist() == [True, False]
        assert np.isnan(r["dim"][0]) and r["dim"][1] == 0.0
        # a single treated unit leaves no variance estimate
        assert np.isnan(r["var_tau"]).all()

    def test_constant_s_zero_variance(self):
        a = Assignment(np.ones(6), np.array([1, 0, 1, 0, 1, 0]))
        rep = report(np.full(6, 2.0), np.full(6, 1.0), a, FullBernoulli(0.5))
        assert rep.var_tau == 0.0
        assert rep.ci_low == rep.ci_high == rep.tau

    def test_report_composes(self, two_node):
        g, params = two_node
        out = outcomes(g, params, FULL_10.W)
        rep = report(out.Y, out.D, FULL_10, FullBernoulli(0.5))
        assert rep.tau1 == pytest.approx(-1.5)
        assert rep.tau2 == pytest.approx(1.5)
        assert rep.tau == pytest.approx(0.0)
        assert rep.dim == pytest.approx(-1.5)
        assert not rep.degenerate and rep.var_tau is None

    def test_report_degenerate_flag(self):
        rep = report(np.ones(3), np.ones(3), Assignment(np.ones(3), np.zeros(3)), FullBernoulli(0.5))
        assert rep.degenerate and rep.dim is None


class TestOutcomeOperator:
    def test_matches_reference(self, rng):
        for loops in (False, True):
            g = random_graph(rng, 12, 50, loops=loops)
            params = random_params(rng, g.n_edges)
            op = OutcomeOperator(g, params)
            W = rng.integers(0, 2, (16, g.n)).astype(np.int8)
            Y, D = op(W)
            for r in range(16):
                ref = outcomes(g, params, W[r])
                np.testing.assert_allclose(Y[r], ref.Y, atol=1e-12)
                np.testing.assert_allclose(D[r], ref.D, atol=1e-12)
