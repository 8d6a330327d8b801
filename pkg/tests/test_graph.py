import numpy as np
import pytest

import oracles as O
from checks import normalization_checks, lambda_max_checks, random_graph, rel_err, spmm_checks
from hategraph.graph import (add_self_loops, build_graph, extract_1_5_degree, from_arrays,
                             induced_subgraph, normalize, read_edge_tsv, read_node_mapping,
                             reverse, spmm, symmetrize, write_edge_tsv, write_node_mapping)


def csr_bytes(g):
    return g.indptr.tobytes() + g.indices.tobytes() + g.weights.tobytes()


class TestBuild:
    def test_duplicates_merge_by_summing(self):
        g = build_graph([("A", "B"), ("A", "B")])
        assert g.num_edges == 1
        assert g.edges() == [(0, 1, 2.0)]
        assert g.node_ids == ("A", "B")

    def test_declared_isolated_nodes(self):
        g = build_graph([], num_nodes=3)
        assert g.num_nodes == 3 and g.num_edges == 0

    def test_order_does_not_matter(self, rng):
        edges = [(0, 1), (2, 3), (4, 0), (1, 2), (3, 4)]
        shuffled = [edges[i] for i in rng.permutation(len(edges))]
        a = build_graph(sorted(edges), num_nodes=5)
        b = build_graph(shuffled, num_nodes=5)
        assert csr_bytes(a) == csr_bytes(b)

    def test_unknown_node_rejected(self):
        with pytest.raises(ValueError, match="undeclared"):
            build_graph([("a", "z")], nodes=["a", "b"])

    @pytest.mark.parametrize("w", [-1.0, float("nan"), float("inf")])
    def test_bad_weights_rejected(self, w):
        with pytest.raises(ValueError):
            build_graph([(0, 1, w)], num_nodes=2)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            build_graph([], nodes=["a", "a"])

    def test_self_loops_kept(self):
        g = build_graph([(0, 0), (0, 1)], num_nodes=2)
        assert g.has_edge(0, 0)

    def test_csr_is_read_only(self):
        g = build_graph([(0, 1)], num_nodes=2)
        with pytest.raises(ValueError):
            g.indices[0] = 1


class TestReverseSymmetrize:
    def test_reverse_single_edge(self):
        g = reverse(build_graph([("A", "B")]))
        assert g.edges() == [(1, 0, 1.0)]

    def test_two_cycle_is_reverse_fixed_point(self):
        g = build_graph([(0, 1), (1, 0)], num_nodes=2)
        assert csr_bytes(reverse(g)) == csr_bytes(g)

    def test_double_reverse_identity(self, rng):
        g, _ = random_graph(rng, 10, weighted=True)
        assert csr_bytes(reverse(reverse(g))) == csr_bytes(g)

    def test_symmetrize_adds_back_edge(self):
        g = symmetrize(build_graph([("A", "B")]))
        assert sorted(g.edges()) == [(0, 1, 1.0), (1, 0, 1.0)]

    def test_symmetric_unchanged(self):
        g = build_graph([(0, 1), (1, 0), (1, 2), (2, 1)], num_nodes=3)
        assert csr_bytes(symmetrize(g)) == csr_bytes(g)

    def test_max_merge(self):
        g = symmetrize(build_graph([("A", "B", 3.0), ("B", "A", 5.0)]))
        assert sorted(g.edges()) == [(0, 1, 5.0), (1, 0, 5.0)]

    def test_matches_dense(self, rng):
        g, edges = random_graph(rng, 9, weighted=True)
        assert np.array_equal(symmetrize(g).to_dense(),
                              O.dense_symmetrize(O.dense_adjacency(9, edges)))


class TestNormalize:
    def test_single_edge_gcn_all_half(self):
        g = build_graph([(0, 1), (1, 0)], num_nodes=2)
        np.testing.assert_allclose(normalize(g, "symmetric-gcn").to_dense(), np.full((2, 2), 0.5))

    def test_edgeless_gcn_is_identity(self):
        m = normalize(build_graph([], num_nodes=3), "symmetric-gcn").to_dense()
        assert np.array_equal(m, np.eye(3))

    def test_row_stochastic_fan_out(self):
        g = build_graph([(0, 1), (0, 2)], num_nodes=3)
        m = normalize(g, "row-stochastic").to_dense()
        assert m[0].tolist() == [0.0, 0.5, 0.5]

    def test_row_stochastic_sink_gets_self_loop(self):
        m = normalize(build_graph([(0, 1)], num_nodes=2), "row-stochastic").to_dense()
        assert m[1].tolist() == [0.0, 1.0]

    def test_edgeless_laplacian_is_minus_identity(self):
        m = normalize(build_graph([], num_nodes=4), "scaled-laplacian")
        assert np.array_equal(m.to_dense(), -np.eye(4))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            normalize(build_graph([], num_nodes=1), "nope")

    def test_against_dense_oracles(self):
        assert max(normalization_checks(n_cases=15)) < 1e-12

    def test_lambda_max(self):
        assert max(lambda_max_checks(n_cases=15)) < 1e-6


class TestSpmm:
    def test_identity(self, rng):
        x = rng.normal(size=(3, 2))
        m = normalize(build_graph([], num_nodes=3), "symmetric-gcn")
        assert np.array_equal(spmm(m, x), x)

    def test_half_matrix(self):
        g = build_graph([(0, 1), (1, 0)], num_nodes=2)
        out = spmm(normalize(g, "symmetric-gcn"), np.eye(2))
        np.testing.assert_allclose(out, np.full((2, 2), 0.5))

    def test_random_against_dense(self):
        assert max(spmm_checks(n_cases=20)) < 1e-12

    def test_shape_mismatch(self):
        m = normalize(build_graph([], num_nodes=3), "symmetric-gcn")
        with pytest.raises(ValueError):
            spmm(m, np.ones((2, 2)))


class TestSubgraphs:
    def test_star_kept_whole(self):
        g = build_graph([(0, 1), (0, 2), (3, 0)], num_nodes=4)
        sub, kept = extract_1_5_degree(g, [0])
        assert kept.tolist() == [0, 1, 2, 3]
        assert sub.num_edges == 3

    def test_distance_two_excluded(self):
        g = build_graph([(0, 1), (1, 2)], num_nodes=3)
        _, kept = extract_1_5_degree(g, [0])
        assert kept.tolist() == [0, 1]

    def test_keeps_edges_among_neighbours(self):
        g = build_graph([(0, 1), (0, 2), (1, 2)], num_nodes=3)
        sub, _ = extract_1_5_degree(g, [0])
        assert sub.has_edge(1, 2)

    def test_random_against_brute_force(self, rng):
        for _ in range(10):
            g, edges = random_graph(rng, 20, p=0.1)
            counts = rng.integers(0, 20, size=20)
            seeds = rng.choice(20, size=3, replace=False)
            _, kept = extract_1_5_degree(g, seeds, min_posts=10, post_counts=counts)
            assert kept.tolist() == O.neighbourhood_1_5(20, edges, seeds.tolist(), 10, counts)

    def test_min_posts_needs_counts(self):
        g = build_graph([(0, 1)], num_nodes=2)
        with pytest.raises(ValueError):
            extract_1_5_degree(g, [0], min_posts=5)

    def test_induced_subgraph_ids(self):
        g = build_graph([("a", "b"), ("b", "c")])
        sub, kept = induced_subgraph(g, [1, 2])
        assert sub.node_ids == ("b", "c") and sub.edges() == [(0, 1, 1.0)]
        assert kept.tolist() == [1, 2]

    def test_add_self_loops_once(self):
        g = add_self_loops(build_graph([(0, 0), (0, 1)], num_nodes=2))
        assert g.has_edge(0, 0) and g.has_edge(1, 1)
        assert g.num_edges == 3


class TestFiles:
    def test_edge_tsv_round_trip(self, tmp_path):
        g = build_graph([("x", "y", 2.5), ("y", "z", 1.0)])
        write_edge_tsv(g, tmp_path / "e.tsv")
        back = read_edge_tsv(tmp_path / "e.tsv")
        assert back.node_ids == g.node_ids
        assert csr_bytes(back) == csr_bytes(g)

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "e.tsv"
        p.write_text("# header\n\na\tb\n")
        assert read_edge_tsv(p).num_edges == 1

    def test_bad_line(self, tmp_path):
        p = tmp_path / "e.tsv"
        p.write_text("a b c d\n")
        with pytest.raises(ValueError, match="e.tsv:1"):
            read_edge_tsv(p)

    def test_node_mapping_round_trip(self, tmp_path):
        g = from_arrays(3, [0, 1], [1, 2], node_ids=["u1", "u2", "u3"])
        write_node_mapping(g, tmp_path / "m.tsv")
        assert read_node_mapping(tmp_path / "m.tsv") == ["u1", "u2", "u3"]


def test_from_arrays_matches_build_graph(rng):
    src = rng.integers(0, 8, size=30)
    dst = rng.integers(0, 8, size=30)
    a = from_arrays(8, src, dst)
    b = build_graph(list(zip(src.tolist(), dst.tolist())), num_nodes=8)
    assert rel_err(a.to_dense(), b.to_dense()) == 0.0
