import numpy as np
import pytest
from hypothesis import given, settings

from fillreduce.oracle import elimination_fill, envelope_metrics
from fillreduce.orderings import (
    fiedler_order,
    min_degree_order,
    natural_order,
    pseudo_peripheral_node,
    rcm_order,
    spectral_nd_order,
)
from fillreduce.sparse import Graph, Permutation, apply_permutation, graph_to_pattern, pattern_to_graph
from fillreduce.spectral import fiedler_eigen
from fillreduce.synth import GenSpec, generate, generate_graph, random_permute

from graphs import cycle, graphs, path, random_connected, random_tree, star

ORDERINGS = {
    "natural": lambda g: natural_order(g.n),
    "rcm": rcm_order,
    "mindeg": min_degree_order,
    "fiedler": fiedler_order,
    "snd": spectral_nd_order,
    "snd-leaf1": lambda g: spectral_nd_order(g, leaf_size=1),
}


def scrambled(spec: GenSpec, seed: int) -> Graph:
    return pattern_to_graph(random_permute(generate(spec), seed)[0])


def scrambled_path(n: int, seed: int) -> Graph:
    return pattern_to_graph(random_permute(graph_to_pattern(path(n)), seed)[0])


class TestNatural:
    def test_small(self):
        assert natural_order(3).new_to_old.tolist() == [0, 1, 2]

    def test_compose_neutral(self):
        p = Permutation([2, 0, 3, 1])
        assert natural_order(4).compose(p) == p
        assert p.compose(natural_order(4)) == p

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            natural_order(0)


class TestRCM:
    def test_scrambled_path(self):
        for seed in range(5):
            g = scrambled_path(5, seed)
            assert elimination_fill(g, rcm_order(g)).bandwidth == 1

    def test_isolated_nodes_contiguous(self):
        g = Graph.from_edges(6, [(0, 2), (2, 4)])
        seq = rcm_order(g).new_to_old.tolist()
        # components in ascending smallest id: {0,2,4}, {1}, {3}, {5}; then reversed
        assert sorted(seq[3:]) == [0, 2, 4]
        assert seq[:3] == [5, 3, 1]

    def test_scrambled_grid_bandwidth(self):
        for seed in range(5):
            g = scrambled(GenSpec("grid2d-5pt", k=10), seed)
            assert envelope_metrics(g, rcm_order(g)).bandwidth <= 11

    def test_beats_scrambled_bandwidth(self):
        wins = 0
        for i in range(50):
            k = 8 + i % 13
            g = scrambled(GenSpec("grid2d-5pt", k=k), 500 + i)
            before = envelope_metrics(g).bandwidth
            wins += envelope_metrics(g, rcm_order(g)).bandwidth <= before
        assert wins >= 45

    def test_pseudo_peripheral_on_path(self):
        g = scrambled_path(9, 1)
        u = pseudo_peripheral_node(g, np.arange(9))
        assert g.degrees[u] == 1


class TestMinDegree:
    def test_trees(self):
        gen = np.random.default_rng(0)
        for _ in range(20):
            g = random_tree(gen, int(gen.integers(2, 60)))
            assert elimination_fill(g, min_degree_order(g)).fill_edges == 0

    def test_star(self):
        g = star(7, 3)
        perm = min_degree_order(g)
        assert elimination_fill(g, perm).fill_edges == 0
        assert perm.new_to_old[-1] == 3 or perm.new_to_old[-2] == 3

    def test_c4(self):
        perm = min_degree_order(cycle(4))
        assert perm.new_to_old[0] == 0
        assert elimination_fill(cycle(4), perm).fill_edges == 1

    def test_grid_beats_natural(self):
        g = generate_graph(GenSpec("grid2d-5pt", k=12))
        assert elimination_fill(g, min_degree_order(g)).fill_edges < elimination_fill(g, natural_order(g.n)).fill_edges


class TestFiedler:
    def test_scrambled_path(self):
        for seed in range(3):
            g = scrambled_path(50, seed)
            assert elimination_fill(g, fiedler_order(g)).bandwidth == 1

    def test_normalized_laplacian_path(self):
        g = scrambled_path(30, 4)
        assert elimination_fill(g, fiedler_order(g, "norm")).bandwidth == 1

    def test_single_node(self):
        assert fiedler_order(Graph.from_edges(1, [])) == Permutation.identity(1)

    def test_equal_components_deterministic(self):
        g = Graph.from_edges(6, [(0, 2), (2, 4), (1, 3), (3, 5)])
        a = fiedler_order(g).new_to_old.tolist()
        assert a == fiedler_order(g).new_to_old.tolist()
        assert sorted(a[:3]) == [0, 2, 4]  # tie on size: smallest id first

    def test_larger_component_first(self):
        g = Graph.from_edges(7, [(0, 1), (2, 3), (3, 4), (4, 5)])
        seq = fiedler_order(g).new_to_old.tolist()
        assert sorted(seq[:4]) == [2, 3, 4, 5]
        assert sorted(seq[4:6]) == [0, 1] and seq[6] == 6

    def test_relabel_equivariance(self):
        gen = np.random.default_rng(2)
        checked = 0
        while checked < 10:
            n = int(gen.integers(6, 16))
            g = random_connected(gen, n, 0.2)
            lam, v = fiedler_eigen(g)
            w = np.linalg.eigvalsh(np.diag(g.degrees.astype(float)) - g.adjacency_matrix().toarray())
            if w[2] - w[1] < 1e-6 or np.min(np.diff(np.sort(v))) < 1e-6:
                continue  # eigenspace or order not unique
            sigma = Permutation(gen.permutation(n))
            h = pattern_to_graph(apply_permutation(graph_to_pattern(g), sigma))
            base = fiedler_order(g).new_to_old
            moved = fiedler_order(h).new_to_old
            mapped = sigma.new_to_old[moved]  # back to g's labels
            assert mapped.tolist() in (base.tolist(), base[::-1].tolist())
            checked += 1


class TestSpectralND:
    def test_grid_beats_natural(self):
        g = generate_graph(GenSpec("grid2d-5pt", k=8))
        assert elimination_fill(g, spectral_nd_order(g)).fill_edges <= elimination_fill(g, natural_order(64)).fill_edges

    def test_small_equals_mindeg(self):
        g = cycle(6)
        assert spectral_nd_order(g, leaf_size=8) == min_degree_order(g)

    def test_disconnected(self):
        g = Graph.from_edges(20, [(i, i + 1) for i in range(9)] + [(i, i + 1) for i in range(10, 19)])
        seq = spectral_nd_order(g, leaf_size=3).new_to_old.tolist()
        assert sorted(seq[:10]) == list(range(10))
        assert sorted(seq[10:]) == list(range(10, 20))

    def test_bad_leaf(self):
        with pytest.raises(ValueError):
            spectral_nd_order(path(4), leaf_size=0)

    def test_separator_last(self):
        g = path(17)
        seq = spectral_nd_order(g, leaf_size=4).new_to_old.tolist()
        assert seq[-1] in (7, 8, 9)


@pytest.mark.parametrize("name", sorted(ORDERINGS))
@settings(max_examples=40, deadline=None)
@given(g=graphs(max_n=30))
def test_always_bijection(name, g):
    perm = ORDERINGS[name](g)
    assert sorted(perm.new_to_old.tolist()) == list(range(g.n))
