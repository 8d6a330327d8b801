"""Hypothesis properties for invariants that hold on every input."""
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from hategraph.evaluation import macro_metrics, make_fold_plan
from hategraph.gnn import GNNClassifier
from hategraph.gnn.layers import GraphOperators, agnn_attention
from hategraph.gnn.model import forward
from hategraph.graph import (build_graph, extract_1_5_degree, normalize, reverse, spmm,
                             symmetrize)
from hategraph.nodeembed import WalkConfig, generate_walks
from hategraph.posthoc import Lexicon, attribute_targets, joint_target_counts, sticky_labels
from hategraph.seeds import build_belief_network, diffuse, kmeans_1d, sample_tiers
from hategraph.text import WordVectors, mean_pool, preprocess


@st.composite
def graphs(draw, max_nodes=12, weighted=False):
    n = draw(st.integers(1, max_nodes))
    node = st.integers(0, n - 1)
    if weighted:
        edge = st.tuples(node, node, st.floats(0.1, 5.0))
    else:
        edge = st.tuples(node, node)
    edges = draw(st.lists(edge, max_size=3 * n))
    return n, edges


def edge_set(g):
    return sorted((u, v, w) for u, v, w in g.edges())


class TestGraphProperties:
    @given(graphs(weighted=True))
    def test_reverse_is_involution(self, ne):
        n, edges = ne
        g = build_graph(edges, num_nodes=n)
        assert edge_set(reverse(reverse(g))) == edge_set(g)

    @given(graphs())
    def test_symmetrize_idempotent(self, ne):
        n, edges = ne
        s = symmetrize(build_graph(edges, num_nodes=n))
        assert edge_set(symmetrize(s)) == edge_set(s)

    @given(graphs(weighted=True))
    def test_row_stochastic_rows_sum_to_one(self, ne):
        n, edges = ne
        m = normalize(build_graph(edges, num_nodes=n), "row-stochastic").matrix
        np.testing.assert_allclose(np.asarray(m.sum(axis=1)).ravel(), 1.0, rtol=1e-12)

    @given(graphs(weighted=True), st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_spmm_matches_dense(self, ne, cols, seed):
        n, edges = ne
        x = np.random.default_rng(seed).normal(size=(n, cols))
        a = oracles.dense_adjacency(n, edges)
        got = spmm(normalize(build_graph(edges, num_nodes=n), "row-stochastic"), x)
        np.testing.assert_allclose(got, oracles.dense_row_stochastic(a) @ x, rtol=1e-9,
                                   atol=1e-12)

    @given(graphs(), st.data())
    def test_1_5_degree_matches_brute_force(self, ne, data):
        n, edges = ne
        seeds = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
        counts = data.draw(st.lists(st.integers(0, 20), min_size=n, max_size=n))
        min_posts = data.draw(st.sampled_from([0, 5]))
        g = build_graph(edges, num_nodes=n)
        _, kept = extract_1_5_degree(g, seeds, min_posts, counts)
        want = oracles.neighbourhood_1_5(n, edges, seeds, min_posts, counts)
        assert kept.tolist() == want


class TestSeedProperties:
    @given(graphs(weighted=True), st.data(), st.integers(1, 8))
    def test_diffusion_bounded(self, ne, data, iterations):
        n, edges = ne
        seeds = data.draw(st.lists(st.integers(0, n - 1), max_size=n, unique=True))
        b = diffuse(build_belief_network(build_graph(edges, num_nodes=n)), seeds, iterations)
        assert ((b.values >= 0) & (b.values <= 1)).all()
        if len(seeds) == n:
            np.testing.assert_allclose(b.values, 1.0)
        if not seeds:
            assert not b.values.any()

    @given(st.lists(st.floats(0, 1), min_size=3, max_size=60), st.integers(1, 4))
    def test_kmeans_tiers_are_contiguous(self, xs, k):
        x = np.array(xs)
        assume(np.unique(x).size >= k)
        t = kmeans_1d(x, k)
        assert np.all(np.diff(t.centroids) > 0)
        order = np.argsort(x, kind="stable")
        # ties share a tier, so sorted values carry non-decreasing tiers
        assert np.all(np.diff(t.tier[order]) >= 0)

    @given(st.lists(st.floats(0, 1), min_size=3, max_size=80), st.integers(0, 15),
           st.integers(1, 20), st.integers(0, 2**31 - 1))
    def test_sample_respects_min_posts(self, xs, min_posts, per_tier, seed):
        x = np.array(xs)
        assume(np.unique(x).size >= 3)
        counts = np.random.default_rng(seed).integers(0, 20, size=x.size)
        s = sample_tiers(kmeans_1d(x, 3), per_tier, min_posts, counts, seed)
        assert (counts[s.nodes] >= min_posts).all()
        for name, nodes in s.by_tier.items():
            assert len(nodes) + s.shortfall[name] == per_tier


FRAGMENTS = ["ab", "XYZ", " ", "#tag", "@bob", ":)", "http://x.y/z", "www.a.b", ",", "!",
             "(c)", "0", "é", "\u200b", "\U0001F600"]
TEXT = st.lists(st.sampled_from(FRAGMENTS), max_size=20).map("".join)


class TestTextProperties:
    @given(TEXT)
    def test_preprocess_idempotent(self, text):
        once = preprocess(text)
        assert preprocess(" ".join(once)) == once

    @given(st.lists(st.sampled_from(["a", "b", "c", "zz"]), max_size=15), st.randoms())
    def test_mean_pool_order_free(self, doc, rnd):
        wv = WordVectors({"a": 0, "b": 1, "c": 2}, np.arange(9.0).reshape(3, 3))
        shuffled = list(doc)
        rnd.shuffle(shuffled)
        np.testing.assert_allclose(mean_pool(doc, wv), mean_pool(shuffled, wv), atol=1e-12)


class TestWalkProperties:
    @given(graphs(max_nodes=10, weighted=True), st.booleans(), st.integers(0, 1000))
    def test_walks_are_paths(self, ne, biased, seed):
        n, edges = ne
        g = build_graph(edges, num_nodes=n)
        walks = generate_walks(g, WalkConfig(2, 8, p=0.5, q=2.0, seed=seed), biased=biased)
        assert len(walks) == 2 * n
        for w in walks:
            assert 1 <= len(w) <= 8
            assert all(g.has_edge(int(a), int(b)) for a, b in zip(w[:-1], w[1:]))
            if len(w) < 8:
                assert g.out_degree()[int(w[-1])] == 0


class TestEvaluationProperties:
    @given(st.lists(st.sampled_from([-1, 0, 1]), min_size=20, max_size=200),
           st.integers(2, 5), st.integers(0, 100))
    def test_fold_plan_partition_and_nesting(self, labels, k, seed):
        labels = np.array(labels)
        assume(min((labels == 0).sum(), (labels == 1).sum()) >= k)
        plan = make_fold_plan(labels, k, fractions=[5, 10, 20], seed=seed)
        tests = [plan.test(f) for f in range(k)]
        assert np.array_equal(np.sort(np.concatenate(tests)), np.flatnonzero(labels >= 0))
        for f in range(k):
            assert np.intersect1d(plan.train_side(f), tests[f]).size == 0
            a, b, c = (plan.train(f, m) for m in (5, 10, 20))
            assert np.isin(a, b).all() and np.isin(b, c).all()

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=3000))
    def test_macro_metrics_match_naive(self, pairs):
        t, p = map(list, zip(*pairs))
        got = macro_metrics(t, p)
        want = oracles.naive_metrics(t, p)
        assert got.macro_f1 == pytest.approx(want["macro_f1"], rel=1e-12, abs=1e-15)
        assert got.f1 == pytest.approx(want["f1"], rel=1e-12, abs=1e-15)
        assert got.accuracy == pytest.approx(want["accuracy"], rel=1e-12)


    def test_macro_metrics_on_1e5_pairs(self, rng):
        t, p = rng.integers(0, 2, 100_000), rng.integers(0, 2, 100_000)
        got, want = macro_metrics(t, p), oracles.naive_metrics(t.tolist(), p.tolist())
        assert got.f1 == pytest.approx(want["f1"], rel=1e-12)
        assert got.macro_f1 == pytest.approx(want["macro_f1"], rel=1e-12)

    def test_fold_plan_on_1e4_nodes(self, rng):
        labels = rng.choice([-1, 0, 1], size=10_000, p=[0.2, 0.56, 0.24])
        plan = make_fold_plan(labels, 5, seed=11)
        tests = [plan.test(f) for f in range(5)]
        assert np.array_equal(np.sort(np.concatenate(tests)), np.flatnonzero(labels >= 0))
        assert sum(t.size for t in tests) == np.unique(np.concatenate(tests)).size
        for f in range(5):
            prev = np.zeros(0, dtype=np.int64)
            for m in plan.fractions:
                cur = plan.train(f, m)
                assert np.isin(prev, cur).all() and np.intersect1d(cur, tests[f]).size == 0
                prev = cur


COMMS = ["Jews", "Muslims", "Blacks", "Women"]


class TestPosthocProperties:
    @given(st.lists(st.lists(st.sampled_from([-1, 0, 1]), min_size=4, max_size=4),
                    min_size=1, max_size=8))
    def test_sticky_monotone(self, raw):
        eff = sticky_labels(raw)
        for col in eff.T:
            hit = np.flatnonzero(col == 1)
            if hit.size:
                assert (col[hit[0]:] == 1).all()
        assert eff.T.tolist() == oracles.sticky_oracle(np.array(raw).T.tolist())
        # non-hateful raw labels before the first hateful month are unchanged
        raw = np.array(raw)
        first = np.where((raw == 1).any(axis=0), (raw == 1).argmax(axis=0), raw.shape[0])
        for j, f in enumerate(first):
            assert (eff[:f, j] == raw[:f, j]).all()

    @given(st.dictionaries(st.text("abcdef", min_size=1, max_size=3),
                           st.sets(st.sampled_from(COMMS + ["Women2"])), max_size=30))
    def test_joint_buckets_partition(self, targets):
        tracked = COMMS[:3]
        counts = joint_target_counts(targets, tracked)
        assert sum(counts.values()) == len(targets)
        assert counts == oracles.joint_buckets_bruteforce(targets, tracked)

    @given(st.lists(st.lists(st.sampled_from(["t1", "t2", "t3s", "x", "t1t2", "#t2"]),
                             max_size=5).map(" ".join), max_size=8), st.randoms())
    def test_targets_ignore_post_order(self, posts, rnd):
        lex = Lexicon({"t1": "A", "t2": "B", "t3": "C"})
        shuffled = list(posts)
        rnd.shuffle(shuffled)
        assert attribute_targets({"u": posts}, lex) == attribute_targets({"u": shuffled}, lex)


def _toy(n, seed):
    rng = np.random.default_rng(seed)
    edges = [(int(a), int(b)) for a, b in rng.integers(0, n, size=(3 * n, 2))]
    return build_graph(edges, num_nodes=n), rng.normal(size=(n, 3))


class TestGnnProperties:
    @pytest.mark.parametrize("variant", ["gcn", "cheb", "sage", "agnn", "gat"])
    @given(n=st.integers(2, 8), seed=st.integers(0, 1000))
    def test_inference_is_pure(self, variant, n, seed):
        g, X = _toy(n, seed)
        y = np.arange(n) % 2
        clf = GNNClassifier(variant, hidden=4, epochs=2, dropout=0.0).fit(X, y, graph=g)
        a = clf.predict_proba(X, graph=g)
        b = clf.predict_proba(X, graph=g)
        assert a.tobytes() == b.tobytes()
        np.testing.assert_allclose(a.sum(axis=1), 1.0)

    @given(n=st.integers(1, 10), seed=st.integers(0, 1000), beta=st.floats(-3, 3))
    def test_agnn_attention_rows_sum_to_one(self, n, seed, beta):
        g, X = _toy(n, seed)
        ops = GraphOperators(g)
        indptr, _ = ops.attention
        alpha = agnn_attention(ops, X, beta)
        sums = np.add.reduceat(alpha, indptr[:-1])
        np.testing.assert_allclose(sums, 1.0, rtol=1e-12)
        assert (alpha >= 0).all()

    @given(n=st.integers(2, 6), seed=st.integers(0, 100))
    def test_eval_forward_ignores_rng(self, n, seed):
        g, X = _toy(n, seed)
        clf = GNNClassifier("gat", hidden=4, epochs=1, dropout=0.5).fit(
            X, np.arange(n) % 2, graph=g)
        ops = clf._ops_for(g)
        Xs = clf._scale(X)
        a = forward(clf.model_, ops, Xs, training=False, rng=np.random.default_rng(1)).data
        b = forward(clf.model_, ops, Xs, training=False, rng=np.random.default_rng(2)).data
        assert a.tobytes() == b.tobytes()
