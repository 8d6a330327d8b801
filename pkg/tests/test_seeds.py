import numpy as np
import pytest

import oracles as O
from checks import diffusion_checks, kmeans_checks, random_graph
from hategraph.graph import build_graph
from hategraph.posthoc import Lexicon
from hategraph.seeds import (BeliefVector, TierAssignment, build_belief_network, diffuse,
                             kmeans_1d, lexicon_seeds, sample_tiers, within_cluster_cost,
                             write_belief_csv)
from hategraph.text.corpus import Post, UserCorpus


class TestBeliefNetwork:
    def test_chain_points_back_to_reposter(self):
        # node 0 reposts node 1
        op = build_belief_network(build_graph([(0, 1)], num_nodes=2))
        assert op.to_dense()[1].tolist() == [1.0, 0.0]

    def test_two_cycle_is_permutation(self):
        op = build_belief_network(build_graph([(0, 1), (1, 0)], num_nodes=2))
        assert np.array_equal(op.to_dense(), [[0.0, 1.0], [1.0, 0.0]])

    def test_weighted_fan(self):
        g = build_graph([(1, 0, 3.0), (2, 0, 1.0)], num_nodes=3)
        row = build_belief_network(g).to_dense()[0]
        np.testing.assert_allclose(row, [0.0, 0.75, 0.25])


class TestDiffuse:
    def test_chain_reaches_one(self):
        op = build_belief_network(build_graph([(0, 1)], num_nodes=2))
        assert diffuse(op, [0], 5).values.tolist() == [1.0, 1.0]

    def test_no_seeds(self):
        op = build_belief_network(build_graph([(0, 1), (1, 2)], num_nodes=3))
        assert not diffuse(op, [], 5).values.any()

    @pytest.mark.parametrize("iterations", [1, 2, 5])
    def test_all_seeds_fixed_point(self, iterations, rng):
        g, _ = random_graph(rng, 12, weighted=True)
        b = diffuse(build_belief_network(g), range(12), iterations)
        np.testing.assert_allclose(b.values, 1.0, atol=1e-12)
        assert b.iteration == iterations

    def test_against_dense_iteration(self):
        assert max(diffusion_checks(n_cases=15)) < 1e-12

    def test_bad_iterations(self):
        op = build_belief_network(build_graph([], num_nodes=2))
        with pytest.raises(ValueError):
            diffuse(op, [0], 0)

    def test_seed_out_of_range(self):
        op = build_belief_network(build_graph([], num_nodes=2))
        with pytest.raises((ValueError, IndexError)):
            diffuse(op, [5], 1)


class TestKMeans:
    def test_three_pairs(self):
        t = kmeans_1d([0, 0.1, 0.5, 0.55, 0.9, 1.0], 3)
        np.testing.assert_allclose(t.centroids, [0.05, 0.525, 0.95])
        assert t.tier.tolist() == [0, 0, 1, 1, 2, 2]

    def test_exact_groups_zero_cost(self):
        t = kmeans_1d([0, 0, 1, 1, 2, 2], 3)
        assert t.centroids.tolist() == [0.0, 1.0, 2.0]
        assert t.cost == 0.0

    def test_unsorted_input_tiers_follow_values(self):
        t = kmeans_1d([1.0, 0.0, 0.52, 0.1, 0.95, 0.5], 3)
        assert t.tier.tolist() == [2, 0, 1, 0, 2, 1]

    def test_against_exhaustive_search(self):
        assert max(kmeans_checks(n_cases=10)) < 1e-9

    def test_fifty_points_cost(self, rng):
        x = rng.random(50)
        cost, _ = O.kmeans_1d_bruteforce(x, 3)
        t = kmeans_1d(x, 3)
        assert abs(t.cost - cost) <= 1e-9 * max(cost, 1.0)
        assert abs(within_cluster_cost(x, t.tier, 3) - cost) <= 1e-9 * max(cost, 1.0)

    def test_fewer_distinct_values_than_k(self):
        with pytest.raises(ValueError, match="distinct"):
            kmeans_1d([0.3, 0.3, 0.7], 3)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            kmeans_1d([0.1, 0.2], 3)

    def test_names(self):
        assert kmeans_1d([0, 1, 2], 3).names() == ["low", "medium", "high"]


def tiers_of(assign):
    assign = np.asarray(assign)
    return TierAssignment(assign, np.arange(3, dtype=float), 0.0)


class TestSampleTiers:
    def test_shortfall_reported(self):
        s = sample_tiers(tiers_of([0, 0, 1, 2]), per_tier=300, min_posts=0,
                         post_counts=[5, 5, 5, 5])
        assert s.by_tier["low"].tolist() == [0, 1]
        assert s.shortfall == {"low": 298, "medium": 299, "high": 299}

    def test_nobody_eligible(self):
        s = sample_tiers(tiers_of([0, 1, 2]), per_tier=4, min_posts=10, post_counts=[1, 2, 3])
        assert s.nodes.size == 0
        assert s.shortfall == {"low": 4, "medium": 4, "high": 4}

    def test_deterministic(self, rng):
        assign = rng.integers(0, 3, size=400)
        counts = rng.integers(0, 30, size=400)
        a = sample_tiers(tiers_of(assign), 20, 10, counts, rng_seed=7)
        b = sample_tiers(tiers_of(assign), 20, 10, counts, rng_seed=7)
        assert np.array_equal(a.nodes, b.nodes)
        assert all(np.array_equal(a.by_tier[k], b.by_tier[k]) for k in a.by_tier)

    def test_respects_min_posts_and_tiers(self, rng):
        assign = rng.integers(0, 3, size=400)
        counts = rng.integers(0, 30, size=400)
        s = sample_tiers(tiers_of(assign), 20, 10, counts, rng_seed=1)
        assert (counts[s.nodes] >= 10).all()
        for t, name in enumerate(("low", "medium", "high")):
            assert (assign[s.by_tier[name]] == t).all()
            assert s.by_tier[name].size == 20


def test_lexicon_seeds_threshold():
    lex = Lexicon({"slur": "X"})
    corpus = UserCorpus({
        "a": [Post.from_text(1, "a slur"), Post.from_text(2, "slur again")],
        "b": [Post.from_text(1, "one slur"), Post.from_text(2, "clean")],
        "c": [Post.from_text(1, "clean")],
    })
    assert lexicon_seeds(corpus, lex, ["a", "b", "c", "d"], 2).tolist() == [0]
    assert lexicon_seeds(corpus, lex, ["a", "b", "c", "d"], 1).tolist() == [0, 1]
    with pytest.raises(ValueError):
        lexicon_seeds(corpus, lex, ["a"], 0)


def test_belief_csv(tmp_path):
    b = BeliefVector(np.array([0.9, 0.1, 0.5]), 5)
    write_belief_csv(tmp_path / "b.csv", b, kmeans_1d(b.values, 3), ["x", "y", "z"])
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "node_id,score,tier" and len(lines) == 4
    assert lines[1] == "x,0.9,high" and lines[2] == "y,0.1,low"
