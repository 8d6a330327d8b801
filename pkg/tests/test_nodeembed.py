import numpy as np
import pytest
from scipy.stats import chisquare

from hategraph.graph import build_graph
from hategraph.nodeembed import (DeepWalk, Node2Vec, WalkConfig, alias_sample_many, alias_setup,
                                 generate_walks, read_walks, train_skipgram, write_walks)


def undirected(pairs, n):
    return build_graph([e for a, b in pairs for e in ((a, b), (b, a))], num_nodes=n)


def cliques(size=10):
    pairs = [(i, j) for i in range(size) for j in range(i + 1, size)]
    pairs += [(i + size, j + size) for i, j in pairs]
    return undirected(pairs, 2 * size)


def second_step_return_rate(g, p, q, n_walks=100_000):
    per_node = -(-n_walks // g.num_nodes)
    walks = generate_walks(g, WalkConfig(per_node, 3, 1, p, q, seed=9), biased=True)
    returned = sum(1 for w in walks if w[2] == w[0])
    return returned / len(walks)


class TestWalks:
    def test_two_cycle_forced(self):
        g = build_graph([("A", "B"), ("B", "A")])
        for w in generate_walks(g, WalkConfig(5, 4))[:5]:
            assert w.tolist() == [0, 1, 0, 1]

    def test_sink_start(self):
        g = build_graph([(0, 1)], num_nodes=2)
        walks = generate_walks(g, WalkConfig(3, 10))
        assert all(w.tolist() == [1] for w in walks[3:])
        assert all(w.tolist() == [0, 1] for w in walks[:3])

    def test_walks_follow_edges(self, rng):
        edges = [(int(a), int(b)) for a, b in rng.integers(0, 15, size=(60, 2)) if a != b]
        g = build_graph(edges, num_nodes=15)
        for biased in (False, True):
            cfg = WalkConfig(4, 12, p=0.5, q=2.0, seed=3)
            for w in generate_walks(g, cfg, biased=biased):
                assert all(g.has_edge(int(a), int(b)) for a, b in zip(w[:-1], w[1:]))

    def test_deterministic(self):
        g = cliques(4)
        a = generate_walks(g, WalkConfig(3, 10, p=0.5, q=2.0, seed=1))
        b = generate_walks(g, WalkConfig(3, 10, p=0.5, q=2.0, seed=1))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_triangle_transition_bias(self):
        # from v after t: return weight 1/p, the third node is adjacent to t (weight 1)
        tri = undirected([(0, 1), (1, 2), (0, 2)], 3)
        p = 4.0
        expected = (1 / p) / (1 / p + 1.0)
        assert abs(second_step_return_rate(tri, p, 1e9) - expected) < 0.01
        assert abs(second_step_return_rate(tri, 1.0, 1e9) - 0.5) < 0.01

    def test_large_q_suppresses_far_steps(self):
        square = undirected([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
        assert second_step_return_rate(square, 1.0, 1e9, 20_000) > 0.999
        assert abs(second_step_return_rate(square, 1.0, 1.0, 20_000) - 0.5) < 0.02

    def test_walk_file_round_trip(self, tmp_path):
        walks = [np.array([0, 1, 2]), np.array([3])]
        write_walks(walks, tmp_path / "w.txt")
        back = read_walks(tmp_path / "w.txt")
        assert [w.tolist() for w in back] == [[0, 1, 2], [3]]

    def test_bad_config(self):
        with pytest.raises(ValueError):
            WalkConfig(p=0.0)
        with pytest.raises(ValueError):
            WalkConfig(walk_length=0)


class TestAlias:
    def test_chi_square(self):
        probs = np.array([1, 2, 3, 4, 5, 6, 7, 8, 9, 10], dtype=float)
        probs /= probs.sum()
        prob, alias = alias_setup(probs)
        n = 1_000_000
        draws = alias_sample_many(prob, alias, n, 2024)
        observed = np.bincount(draws, minlength=10)
        assert chisquare(observed, probs * n).pvalue > 0.001

    def test_degenerate_distribution(self):
        prob, alias = alias_setup([0.0, 1.0, 0.0])
        assert set(alias_sample_many(prob, alias, 1000, 1).tolist()) == {1}


class TestSkipGram:
    def test_cliques_separate(self):
        emb = DeepWalk(dimensions=16, walks_per_node=10, walk_length=20, window=4,
                       epochs=2, random_state=0).fit(cliques(10)).embedding_
        unit = emb / np.linalg.norm(emb, axis=1, keepdims=True)
        sim = unit @ unit.T
        block = np.repeat([0, 1], 10)
        same = block[:, None] == block[None, :]
        off_diag = ~np.eye(20, dtype=bool)
        assert sim[same & off_diag].mean() > sim[~same].mean()

    def test_single_node(self):
        emb = train_skipgram([np.array([0])], num_nodes=1, dim=8)
        assert np.isfinite(emb.matrix).all() and emb.n_pairs == 0

    def test_same_seed_same_matrix(self):
        g = cliques(5)
        a = Node2Vec(dimensions=8, walks_per_node=2, walk_length=10, p=0.5, q=2.0).fit(g)
        b = Node2Vec(dimensions=8, walks_per_node=2, walk_length=10, p=0.5, q=2.0).fit(g)
        assert a.embedding_.tobytes() == b.embedding_.tobytes()

    def test_transform_is_transductive(self):
        g = cliques(3)
        m = DeepWalk(dimensions=4, walks_per_node=1, walk_length=5).fit(g)
        assert m.transform().shape == (6, 4)
        with pytest.raises(ValueError):
            m.transform(cliques(4))

    def test_save_and_load(self, tmp_path):
        m = DeepWalk(dimensions=4, walks_per_node=1, walk_length=5).fit(cliques(3))
        m.save(tmp_path / "n.hgemb", node_ids=list("abcdef"))
        ids, mat, meta = DeepWalk.load_matrix(tmp_path / "n.hgemb")
        assert ids == list("abcdef")
        assert np.array_equal(mat, m.embedding_.astype(np.float32))
        assert meta["kind"] == "deepwalk"
