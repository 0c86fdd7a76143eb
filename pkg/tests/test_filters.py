import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.special import eval_jacobi

from sgfcf import (
    ExponentialFilter,
    HomophilyScores,
    IgfConfig,
    JacobiFilter,
    MarkovFilter,
    MonomialFilter,
    eval_filter,
    graph_from_matrix,
    homophilic_pair_counts,
    homophilic_ratio_all,
    map_homo_to_beta,
)
from sgfcf.errors import ConfigError, OddDelta, SizeCapExceeded
from sgfcf.filters import write_homophily_csv
from sgfcf.theory import random_bipartite_graph

from conftest import random_graph
from oracles import homophily_counts_bruteforce


class TestEvalFilter:
    def test_monomial_zero_power(self):
        weights = eval_filter(MonomialFilter(beta=0.0), np.array([1.0, 0.5, 0.0]))
        assert np.allclose(weights, 1.0)

    def test_monomial_squaring(self):
        weights = eval_filter(MonomialFilter(beta=2.0), np.array([1.0, 0.5, 0.1]))
        assert np.allclose(weights, [1.0, 0.25, 0.01])

    def test_monomial_zero_convention(self):
        # 0^beta = 0 for beta > 0 even through the clamped power
        assert eval_filter(MonomialFilter(beta=1.5), np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-200)

    def test_exponential_normalized_at_one(self):
        sigma = np.array([1.0, 0.6, 0.2])
        weights = eval_filter(ExponentialFilter(beta=2.5), sigma)
        assert weights[0] == pytest.approx(1.0)
        assert np.allclose(weights, np.exp(2.5 * sigma) * np.exp(-2.5))

    def test_markov_hand_computed(self):
        weights = eval_filter(MarkovFilter(order=2), np.array([1.0, 0.5]))
        assert np.allclose(weights, [1.0, (1 + 0.5 + 0.25) / 3])

    def test_jacobi_matches_scipy(self):
        sigma = np.linspace(0.0, 1.0, 17)
        for a, b, order in [(1.0, 1.0, 3), (0.5, -0.2, 4), (2.0, 0.0, 5)]:
            expected = sum(eval_jacobi(k, a, b, sigma) for k in range(order + 1))
            got = eval_filter(JacobiFilter(a=a, b=b, order=order), sigma)
            assert np.allclose(got, np.maximum(expected, 0.0), atol=1e-12)

    def test_jacobi_clamped_nonnegative(self):
        sigma = np.linspace(0.0, 1.0, 101)
        weights = eval_filter(JacobiFilter(a=0.0, b=4.0, order=6), sigma)
        assert (weights >= 0.0).all()

    def test_monotone_families(self):
        sigma = np.linspace(1.0, 0.0, 40)  # decreasing
        for family in (MonomialFilter(1.7), ExponentialFilter(3.0), MarkovFilter(4)):
            weights = eval_filter(family, sigma)
            assert (np.diff(weights) <= 1e-12).all(), family

    def test_validation(self):
        with pytest.raises(ConfigError):
            MonomialFilter(beta=-0.1)
        with pytest.raises(ConfigError):
            MarkovFilter(order=0)
        with pytest.raises(ConfigError):
            JacobiFilter(a=-1.0, b=0.0)


@settings(max_examples=40, deadline=None)
@given(
    beta=st.floats(0.0, 6.0),
    sigma=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20),
)
def test_monomial_bounded_on_unit_interval(beta, sigma):
    weights = eval_filter(MonomialFilter(beta=beta), np.array(sigma))
    assert ((weights >= 0.0) & (weights <= 1.0 + 1e-12)).all()


class TestHomophily:
    def test_single_item_user_scores_one(self):
        # u0 has one item; only the diagonal pair contributes
        graph = graph_from_matrix(sp.csr_matrix(np.array([[1.0, 0], [1, 1]])))
        scores = homophilic_ratio_all(graph, delta=2)
        assert scores.user_scores[0] == 1.0

    def test_full_square_all_ones(self):
        graph = graph_from_matrix(sp.csr_matrix(np.ones((2, 2))))
        scores = homophilic_ratio_all(graph, delta=2)
        assert np.allclose(scores.user_scores, 1.0)
        assert np.allclose(scores.item_scores, 1.0)

    def test_strict_mode_counts_only_diagonal_at_delta_two(self):
        rng = np.random.default_rng(0)
        graph = random_graph(rng, 8, 10)
        scores = homophilic_ratio_all(graph, delta=2, mode="strict")
        active = graph.user_degrees > 0
        assert np.allclose(scores.user_scores[active], 1.0 / graph.user_degrees[active])

    def test_odd_delta_rejected(self):
        rng = np.random.default_rng(1)
        graph = random_graph(rng, 5, 5)
        with pytest.raises(OddDelta):
            homophilic_ratio_all(graph, delta=3)
        with pytest.raises(OddDelta):
            homophilic_ratio_all(graph, delta=0)

    @pytest.mark.parametrize("delta", [2, 4, 6])
    @pytest.mark.parametrize("mode", ["inclusive", "strict"])
    def test_matches_bruteforce_bfs(self, delta, mode):
        rng = np.random.default_rng(delta * 7 + (mode == "strict"))
        for trial in range(3):
            R = random_bipartite_graph(rng, int(rng.integers(6, 18)), int(rng.integers(6, 18)))
            graph = graph_from_matrix(R)
            fast_users, fast_items = homophilic_pair_counts(graph, delta, mode)
            slow_users, slow_items = homophily_counts_bruteforce(graph, delta, mode)
            assert np.array_equal(fast_users, slow_users), (delta, mode, trial)
            assert np.array_equal(fast_items, slow_items), (delta, mode, trial)

    def test_exact_cap_enforced(self):
        rng = np.random.default_rng(2)
        R = random_bipartite_graph(rng, 150, 120)
        with pytest.raises(SizeCapExceeded):
            homophilic_pair_counts(graph_from_matrix(R), delta=4)

    def test_sampled_path_bounds(self):
        rng = np.random.default_rng(3)
        R = random_bipartite_graph(rng, 150, 120)
        graph = graph_from_matrix(R)
        scores = homophilic_ratio_all(graph, delta=4, pair_samples=8, seed=9)
        for vec in (scores.user_scores, scores.item_scores):
            assert ((vec > 0.0) & (vec <= 1.0)).all()
        again = homophilic_ratio_all(graph, delta=4, pair_samples=8, seed=9)
        assert np.array_equal(scores.user_scores, again.user_scores)

    def test_scores_in_unit_interval(self):
        rng = np.random.default_rng(4)
        graph = random_graph(rng, 20, 16)
        scores = homophilic_ratio_all(graph, delta=2)
        for vec in (scores.user_scores, scores.item_scores):
            assert ((vec > 0.0) & (vec <= 1.0)).all()


class TestIgfMapping:
    def test_zero_width_range(self):
        scores = HomophilyScores(
            user_scores=np.array([0.3, 0.9]), item_scores=np.array([0.5]), delta=2
        )
        profile = map_homo_to_beta(scores, IgfConfig(beta=2.0, beta1=2.0, beta2=2.0))
        assert np.allclose(profile.user_beta, 2.0)
        assert np.allclose(profile.item_beta, 2.0)

    def test_linear_interpolation(self):
        scores = HomophilyScores(
            user_scores=np.array([0.2, 0.5, 0.8]), item_scores=np.array([1.0]), delta=2
        )
        profile = map_homo_to_beta(scores, IgfConfig(beta=2.0, beta1=1.0, beta2=3.0))
        assert np.allclose(profile.user_beta, [1.0, 2.0, 3.0])
        # degenerate item side falls back to the anchor
        assert np.allclose(profile.item_beta, 2.0)

    def test_all_equal_scores_get_anchor(self):
        scores = HomophilyScores(
            user_scores=np.full(4, 0.7), item_scores=np.full(3, 0.7), delta=2
        )
        profile = map_homo_to_beta(scores, IgfConfig(beta=1.5, beta1=1.0, beta2=2.0))
        assert np.allclose(profile.user_beta, 1.5)

    def test_range_invariant(self):
        rng = np.random.default_rng(5)
        scores = HomophilyScores(
            user_scores=rng.uniform(0.01, 1.0, 50),
            item_scores=rng.uniform(0.01, 1.0, 40),
            delta=2,
        )
        cfg = IgfConfig(beta=1.5, beta1=1.2, beta2=1.8)
        profile = map_homo_to_beta(scores, cfg)
        for vec in (profile.user_beta, profile.item_beta):
            assert vec.min() >= cfg.beta1 - 1e-12
            assert vec.max() <= cfg.beta2 + 1e-12

    def test_order_preserved_under_scaling(self):
        rng = np.random.default_rng(6)
        base = rng.uniform(0.01, 1.0, 30)
        cfg = IgfConfig(beta=2.0, beta1=1.0, beta2=3.0)
        profile_a = map_homo_to_beta(
            HomophilyScores(user_scores=base, item_scores=base, delta=2), cfg
        )
        profile_b = map_homo_to_beta(
            HomophilyScores(user_scores=0.37 * base, item_scores=0.37 * base, delta=2), cfg
        )
        assert np.array_equal(np.argsort(profile_a.user_beta), np.argsort(profile_b.user_beta))
        assert np.allclose(profile_a.user_beta, profile_b.user_beta)

    def test_global_scope(self):
        scores = HomophilyScores(
            user_scores=np.array([0.0, 1.0]), item_scores=np.array([0.5]), delta=2
        )
        profile = map_homo_to_beta(scores, IgfConfig(beta=1.0, beta1=0.0, beta2=2.0), scope="global")
        assert np.allclose(profile.user_beta, [0.0, 2.0])
        assert np.allclose(profile.item_beta, [1.0])

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            IgfConfig(beta=1.0, beta1=2.0, beta2=3.0)


def test_homophily_csv_export(tmp_path):
    rng = np.random.default_rng(7)
    graph = random_graph(rng, 6, 5)
    scores = homophilic_ratio_all(graph, delta=2)
    profile = map_homo_to_beta(scores, IgfConfig(beta=1.0, beta1=0.5, beta2=1.5))
    path = tmp_path / "homo.csv"
    write_homophily_csv(scores, profile, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "node_type,node_id,score,beta"
    assert len(lines) == 1 + 6 + 5
