import itertools

import numpy as np
import pytest

from conftest import random_graph, random_params
from dyadic_tte.clustering import Clustering
from dyadic_tte.designs import FullBernoulli, SubPopBernoulli, TwoStageCluster
from dyadic_tte.dyadic_model import outcomes
from dyadic_tte.estimators import ht
from dyadic_tte.oracle import (
    BudgetExceeded,
    EnumerationBudget,
    atom_count,
    crosscheck,
    exact_expectation,
    exact_expectations,
    iter_atoms,
)
from dyadic_tte.theory import ESTIMATORS


def naive_subpop(g, params, p, pi):
    """Independent reference: loop over all 3**n unit states."""
    states = [(0, 0, 1 - p), (1, 0, p * (1 - pi)), (1, 1, p * pi)]
    acc = 0.0
    for combo in itertools.product(states, repeat=g.n):
        V = np.array([s[0] for s in combo])
        W = np.array([s[1] for s in combo])
        prob = np.prod([s[2] for s in combo])
        out = outcomes(g, params, W)
        acc += prob * (ht(out.Y, V, W, p, pi) + ht(out.D, V, W, p, pi))
    return acc


class TestExamples:
    def test_full(self, two_node):
        assert exact_expectation(*two_node, FullBernoulli(0.5), "tau") == pytest.approx(1.0, abs=1e-15)

    def test_subpop(self, two_node):
        res = exact_expectations(*two_node, SubPopBernoulli(0.5, 0.5))
        assert res["tau"] == pytest.approx(0.875, abs=1e-15)
        assert res["atoms"] == 9

    def test_twostage_one_cluster(self, two_node):
        d = TwoStageCluster(0.3, 0.5, Clustering(np.zeros(2, int)))
        assert exact_expectation(*two_node, d, "tau") == pytest.approx(1.0, abs=1e-15)

    def test_dim_refused(self, two_node):
        with pytest.raises(ValueError):
            exact_expectation(*two_node, FullBernoulli(0.5), "dim")


class TestAtoms:
    @pytest.mark.parametrize("design, count", [
        (FullBernoulli(0.3), 2 ** 5),
        (SubPopBernoulli(0.4, 0.3), 3 ** 5),
        (TwoStageCluster(0.4, 0.3, Clustering(np.array([0, 0, 1, 1, 1]))), 5 * 9),
    ])
    def test_probabilities_sum_to_one(self, design, count):
        assert atom_count(design, 5) == count
        probs = np.concatenate([pr for _, _, pr in iter_atoms(design, 5, chunk=7)])
        assert probs.size == count
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_atoms_are_valid(self):
        d = TwoStageCluster(0.4, 0.3, Clustering(np.array([0, 1, 0, 1])))
        seen = set()
        for V, W, _ in iter_atoms(d, 4):
            assert np.all(W <= V)
            assert np.all(V[:, 0] == V[:, 2]) and np.all(V[:, 1] == V[:, 3])
            seen.update(map(lambda r: tuple(r), np.hstack([V, W]).tolist()))
        assert len(seen) == atom_count(d, 4)

    def test_budget(self, rng):
        g = random_graph(rng, 8, 10)
        with pytest.raises(BudgetExceeded, match="6561"):
            exact_expectations(g, random_params(rng, g.n_edges), SubPopBernoulli(0.5, 0.5), EnumerationBudget(1000))


class TestAgreement:
    def test_naive_subpop(self, rng):
        g = random_graph(rng, 5, 8)
        params = random_params(rng, g.n_edges)
        res = exact_expectations(g, params, SubPopBernoulli(0.3, 0.6))
        assert res["tau"] == pytest.approx(naive_subpop(g, params, 0.3, 0.6), abs=1e-12)

    def test_degenerate_designs_agree(self, rng):
        g = random_graph(rng, 6, 10)
        params = random_params(rng, g.n_edges)
        a = exact_expectations(g, params, FullBernoulli(0.35))
        b = exact_expectations(g, params, SubPopBernoulli(1.0, 0.35))
        c = exact_expectations(g, params, TwoStageCluster(1.0, 0.35, Clustering(np.arange(6))))
        for e in ESTIMATORS:
            assert a[e] == pytest.approx(b[e], abs=1e-12)
            assert a[e] == pytest.approx(c[e], abs=1e-12)

    def test_list_matches_single(self, rng):
        g = random_graph(rng, 5, 8)
        plist = [random_params(rng, g.n_edges) for _ in range(3)]
        many = exact_expectations(g, plist, SubPopBernoulli(0.5, 0.4))
        for prm, res in zip(plist, many):
            assert res == exact_expectations(g, prm, SubPopBernoulli(0.5, 0.4))

    def test_additive_per_atom(self, rng):
        g = random_graph(rng, 5, 8)
        res = exact_expectations(g, random_params(rng, g.n_edges), SubPopBernoulli(0.5, 0.4))
        assert res["tau"] == pytest.approx(res["tau1"] + res["tau2"], abs=1e-14)


class TestCrosscheck:
    def test_random_six_node(self, rng):
        g = random_graph(rng, 6, 10)
        c = Clustering(np.array([0, 0, 0, 1, 1, 2]))
        designs = [FullBernoulli(0.3), SubPopBernoulli(0.6, 0.7), TwoStageCluster(0.4, 0.5, c),
                   TwoStageCluster(0.7, 0.2, c)]
        for _ in range(20):
            params = random_params(rng, g.n_edges)
            for d in designs:
                rep = crosscheck(g, params, d)
                assert rep.max_diff("exact") < 1e-10
                assert rep.prob_total == pytest.approx(1.0, abs=1e-12)

    def test_twostage_bias_display_zeta_sigma(self, rng):
        g = random_graph(rng, 6, 10)
        c = Clustering(np.array([0, 0, 0, 1, 1, 2]))
        for _ in range(20):
            params = random_params(rng, g.n_edges, 0.0, 1.0)
            for p in (0.25, 0.5, 0.75):
                rep = crosscheck(g, params, TwoStageCluster(p, 0.5, c))
                assert rep.diffs["bias_eq_zeta"]["tau"] < 1e-10

    def test_aggregate_form_exact_with_zeta_share(self, rng):
        # with σ̄ set to the ζ-weighted edge share the aggregate expectation is exact at any π,
        # while the bias display only coincides at π = 0.5
        g = random_graph(rng, 6, 10)
        c = Clustering(np.array([0, 0, 1, 1, 1, 2]))
        params = random_params(rng, g.n_edges, 0.1, 1.0)
        for pi in (0.2, 0.5, 0.8):
            rep = crosscheck(g, params, TwoStageCluster(0.4, pi, c))
            assert rep.max_diff("aggregate_zeta") < 1e-10
            assert (rep.diffs["bias_eq_zeta"]["tau"] < 1e-10) == (pi == 0.5)

    def test_extended_form_differs(self, rng):
        # the extended form carries β·σ̄ and γ·σ̄ terms the oracle does not support
        g = random_graph(rng, 6, 10)
        c = Clustering(np.array([0, 0, 0, 1, 1, 2]))
        params = random_params(rng, g.n_edges, 0.1, 1.0)
        rep = crosscheck(g, params, TwoStageCluster(0.5, 0.5, c))
        assert rep.max_diff("exact") < 1e-10
        assert rep.max_diff("extended_zeta") > 1e-3
