import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from fillreduce.sparse import Graph, laplacian
from fillreduce.spectral import (
    EigenSolveError,
    EmbedConfig,
    build_hierarchy,
    coarsen,
    fiedler_alignment,
    fiedler_eigen,
    fix_signs,
    init_weights,
    interpolate,
    mgnn_forward,
    mgnn_loss_and_grad,
    mgnn_raw,
    node_direction,
    orthonormalize,
    restrict_mean,
    sage_conv,
    spectral_loss,
    spectral_loss_grad,
    train_embedding,
)
from fillreduce.synth import GenSpec, generate_graph

from graphs import cycle, path, random_connected, random_graph, star


def dense_spectrum(g: Graph, kind: str = "unnorm"):
    return scipy.linalg.eigh(laplacian(g, kind).matrix.toarray())


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(1e-12, np.max(np.abs(b)))


class TestFiedlerEigen:
    def test_p3(self):
        lam, v = fiedler_eigen(path(3))
        assert lam == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(v, np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0), atol=1e-10)

    @pytest.mark.parametrize("kind", ["unnorm", "norm"])
    def test_p2(self, kind):
        lam, _ = fiedler_eigen(path(2), kind)
        assert lam == pytest.approx(2.0, abs=1e-12)

    def test_iterative_path_matches_closed_form(self):
        n = 60
        lam, v = fiedler_eigen(path(n))
        assert lam == pytest.approx(2.0 - 2.0 * np.cos(np.pi / n), abs=1e-9)
        want = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        want /= np.linalg.norm(want)
        assert np.allclose(v, want, atol=1e-6)  # sign fixed: first entry positive

    def test_random_connected_vs_dense(self):
        gen = np.random.default_rng(11)
        for _ in range(15):
            n = int(gen.integers(3, 120))
            g = random_connected(gen, n, 0.05)
            for kind in ("unnorm", "norm"):
                lam, v = fiedler_eigen(g, kind)
                w, _ = dense_spectrum(g, kind)
                assert abs(lam - w[1]) <= 1e-6
                L = laplacian(g, kind).matrix
                assert np.linalg.norm(L @ v - lam * v) <= 1e-6

    def test_disconnected_rejected(self):
        with pytest.raises(ValueError):
            fiedler_eigen(Graph.from_edges(4, [(0, 1), (2, 3)]))

    def test_unreachable_tol_raises_with_residual(self):
        g = generate_graph(GenSpec("grid2d-5pt", k=12))
        with pytest.raises(EigenSolveError) as info:
            fiedler_eigen(g, tol=1e-300)
        assert 0 < info.value.residual < 1e-6

    def test_sign_rule(self):
        v = fix_signs(np.array([0.0, -0.5, 0.5]))
        assert v.tolist() == [0.0, 0.5, -0.5]

    def test_node_direction_normalized_path_monotone(self):
        _, v = fiedler_eigen(path(12), "norm")
        d = node_direction(path(12), v, "norm")
        assert np.all(np.diff(d) < 0) or np.all(np.diff(d) > 0)


class TestCoarsening:
    def test_p4(self):
        cg, cmap, cw = coarsen(path(4))
        assert cmap.tolist() == [0, 0, 1, 1]
        assert cg.n == 2 and cg.edges().tolist() == [[0, 1]]
        assert cw.tolist() == [1.0, 1.0]

    def test_edgeless_no_progress(self):
        cg, cmap, _ = coarsen(Graph.from_edges(4, []))
        assert cg.n == 4 and cmap.tolist() == [0, 1, 2, 3]
        assert build_hierarchy(Graph.from_edges(4, [])).sizes == [4, 2]

    def test_heavy_edge_preferred(self):
        g = path(3)
        # edge (1,2) is heavy, but node 0 is visited first and its only edge is (0,1)
        w = np.where((np.repeat(np.arange(3), g.degrees) == 1) & (g.indices == 2), 5.0, 1.0)
        w = np.where((np.repeat(np.arange(3), g.degrees) == 2) & (g.indices == 1), 5.0, w)
        _, cmap, _ = coarsen(g, w)
        assert cmap.tolist() == [0, 0, 1]

    def test_p8_levels(self):
        assert build_hierarchy(path(8)).sizes == [8, 4, 2]

    def test_p2_no_levels(self):
        h = build_hierarchy(path(2))
        assert h.sizes == [2] and h.levels[0].cluster_map is None

    def test_grid_strictly_decreasing(self):
        sizes = build_hierarchy(generate_graph(GenSpec("grid2d-5pt", k=10))).sizes
        assert all(a > b for a, b in zip(sizes, sizes[1:]))
        assert sizes[-1] <= 2

    def test_star_terminates(self):
        sizes = build_hierarchy(star(40)).sizes
        assert sizes[-1] <= 2 and all(a > b for a, b in zip(sizes, sizes[1:]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 60), st.integers(0, 10_000))
    def test_hierarchy_reconstructs_levels(self, n, seed):
        g = random_graph(np.random.default_rng(seed), n, 0.1)
        h = build_hierarchy(g)
        for fine, coarse in zip(h.levels, h.levels[1:]):
            cmap = fine.cluster_map
            assert np.bincount(cmap, minlength=coarse.graph.n).sum() == fine.graph.n
            assert set(cmap.tolist()) == set(range(coarse.graph.n))
            X = np.random.default_rng(seed).standard_normal((coarse.graph.n, 3))
            assert np.allclose(restrict_mean(interpolate(X, cmap), cmap, coarse.graph.n), X, atol=1e-12)


class TestInterpolateAndConv:
    def test_interpolate_copy(self):
        out = interpolate(np.eye(2), np.array([0, 0, 1, 1]))
        assert out.tolist() == [[1, 0], [1, 0], [0, 1], [0, 1]]

    def test_interpolate_singletons(self):
        X = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(interpolate(X, np.arange(3)), X)

    def test_sage_p2(self):
        out = sage_conv(path(2), np.eye(2), np.eye(2), np.eye(2))
        assert out.tolist() == [[1.0, 1.0], [1.0, 1.0]]

    def test_sage_isolated(self):
        g = Graph.from_edges(3, [(0, 1)])
        F = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        W1 = np.array([[2.0, 0.0], [0.0, 3.0]])
        out = sage_conv(g, F, W1, np.full((2, 2), 7.0))
        assert out[2].tolist() == (F[2] @ W1).tolist()

    def test_sage_identity(self):
        F = np.random.default_rng(0).standard_normal((5, 3))
        assert np.allclose(sage_conv(cycle(5), F, np.eye(3), np.zeros((3, 3))), F)

    def test_sage_shape_check(self):
        with pytest.raises(ValueError):
            sage_conv(path(3), np.ones((2, 2)), np.eye(2), np.eye(2))


class TestLoss:
    def test_eigenvector_fixed_point(self):
        g = random_connected(np.random.default_rng(1), 20, 0.1)
        lap = laplacian(g, "norm")
        w, V = dense_spectrum(g, "norm")
        loss, lam = spectral_loss(lap, V[:, :2])
        assert loss == pytest.approx(w[0] + w[1], abs=1e-10)
        assert np.allclose(lam, w[:2], atol=1e-10)

    def test_p2(self):
        F = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
        loss, _ = spectral_loss(laplacian(path(2), "norm"), F)
        assert loss == pytest.approx(2.0, abs=1e-12)

    def test_duplicated_column_penalty(self):
        g = path(6)
        lap = laplacian(g, "norm")
        _, V = dense_spectrum(g, "norm")
        F = np.column_stack([V[:, 1], V[:, 1]])
        loss, lam = spectral_loss(lap, F, rho=1.0)
        base, _ = spectral_loss(lap, F, rho=0.0)
        G = F.T @ F - np.eye(2)
        assert loss - base == pytest.approx(float(np.sum(G * G)), abs=1e-12)
        assert loss - base > 0

    def test_span_invariance(self):
        gen = np.random.default_rng(4)
        for _ in range(10):
            g = random_connected(gen, int(gen.integers(5, 40)), 0.15)
            lap = laplacian(g, "norm")
            F = gen.standard_normal((g.n, 2))
            M = gen.standard_normal((2, 2)) + 2 * np.eye(2)
            a, _ = spectral_loss(lap, F, orthonormalize_first=True)
            b, _ = spectral_loss(lap, F @ M, orthonormalize_first=True)
            assert abs(a - b) <= 1e-8

    def test_rayleigh_lower_bound(self):
        gen = np.random.default_rng(8)
        for _ in range(20):
            g = random_connected(gen, int(gen.integers(4, 200)), 0.03)
            lap = laplacian(g, "unnorm")
            w, _ = dense_spectrum(g)
            F = np.column_stack([np.ones(g.n), gen.standard_normal(g.n)])
            q = orthonormalize(F)
            f2 = q[:, 1]
            assert float(f2 @ (lap.matrix @ f2)) >= w[1] - 1e-9

    @pytest.mark.parametrize("flow", [True, False])
    def test_feature_gradient_fd(self, flow):
        gen = np.random.default_rng(5)
        for _ in range(5):
            g = random_connected(gen, int(gen.integers(4, 30)), 0.15)
            lap = laplacian(g, "norm")
            F = gen.standard_normal((g.n, 2)) / np.sqrt(g.n)
            _, lam0, dF = spectral_loss_grad(lap, F, 1.0, flow)
            fd = np.zeros_like(F)
            h = 1e-5
            for idx in np.ndindex(F.shape):
                Fp, Fm = F.copy(), F.copy()
                Fp[idx] += h
                Fm[idx] -= h
                if flow:
                    lp = spectral_loss_grad(lap, Fp)[0]
                    lm = spectral_loss_grad(lap, Fm)[0]
                else:
                    lp, lm = (_frozen_loss(lap, X, lam0) for X in (Fp, Fm))
                fd[idx] = (lp - lm) / (2 * h)
            assert rel_err(dF, fd) <= 1e-4


def _frozen_loss(lap, F, lam):
    L = lap.matrix
    LF = L @ F
    R = LF - F * lam
    G = F.T @ F - np.eye(F.shape[1])
    return float(np.sum(R * R) + np.einsum("ij,ij->", F, LF) + np.sum(G * G))


class TestNetwork:
    def test_orthonormal_output(self):
        gen = np.random.default_rng(6)
        for seed in range(8):
            g = random_connected(gen, int(gen.integers(3, 50)), 0.1)
            st_ = mgnn_forward(build_hierarchy(g), init_weights(seed=seed), d=2)
            assert np.allclose(st_.F.T @ st_.F, np.eye(2), atol=1e-10)

    def test_n2(self):
        st_ = mgnn_forward(build_hierarchy(path(2)), init_weights(seed=1))
        assert st_.F.shape == (2, 2)
        assert np.allclose(st_.F.T @ st_.F, np.eye(2), atol=1e-12)

    def test_wrong_d(self):
        with pytest.raises(ValueError):
            mgnn_forward(build_hierarchy(path(5)), init_weights(d=2), d=3)

    def test_weight_init_range(self):
        w = init_weights(hidden=32, seed=3)
        a = np.sqrt(6.0 / (32 + 32))
        assert np.all(np.abs(w.W1) <= a) and np.all(w.b == 0)
        assert np.array_equal(init_weights(seed=3).flatten(), w.flatten())

    def test_weight_gradient_fd(self):
        gen = np.random.default_rng(9)
        for trial in range(4):
            g = random_connected(gen, int(gen.integers(5, 30)), 0.15)
            h = build_hierarchy(g)
            lap = laplacian(g, "norm")
            w = init_weights(hidden=6, seed=trial)
            _, grads = mgnn_loss_and_grad(h, w, lap)
            flat, gflat = w.flatten(), grads.flatten()
            fd = np.zeros_like(flat)
            step = 1e-5
            for i in range(flat.size):
                p, m = flat.copy(), flat.copy()
                p[i] += step
                m[i] -= step
                fd[i] = (mgnn_loss_and_grad(h, w.unflatten(p), lap)[0]
                         - mgnn_loss_and_grad(h, w.unflatten(m), lap)[0]) / (2 * step)
            assert rel_err(gflat, fd) <= 1e-4

    def test_raw_output_shape(self):
        h = build_hierarchy(cycle(9))
        assert mgnn_raw(h, init_weights(d=3)).shape == (9, 3)


class TestTraining:
    def test_eig_path(self):
        st_ = train_embedding(path(50), EmbedConfig(mode="eig"))
        assert st_.residual <= 1e-6
        assert fiedler_alignment(path(50), st_.F[:, 1]) == pytest.approx(1.0, abs=1e-9)

    def test_eig_rejects_d3(self):
        with pytest.raises(ValueError):
            train_embedding(path(5), EmbedConfig(mode="eig", d=3))

    def test_direct_grid_loss(self):
        g = generate_graph(GenSpec("grid2d-5pt", k=8))
        st_ = train_embedding(g, EmbedConfig(mode="direct"))
        w, _ = dense_spectrum(g, "norm")
        assert st_.loss == pytest.approx(w[0] + w[1], rel=0.05)

    def test_mgnn_p8(self):
        st_ = train_embedding(path(8), EmbedConfig(mode="mgnn"))
        assert fiedler_alignment(path(8), st_.F[:, 1]) >= 0.99
        assert len(st_.history) == EmbedConfig().steps

    def test_history_finite(self):
        st_ = train_embedding(cycle(10), EmbedConfig(mode="direct", steps=50))
        assert np.all(np.isfinite(st_.history))

    def test_alignment_multiplicity(self):
        g = cycle(8)  # lambda_2 has multiplicity two
        w, V = dense_spectrum(g, "norm")
        f = V[:, 1] + V[:, 2]
        assert fiedler_alignment(g, f) == pytest.approx(1.0, abs=1e-9)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            EmbedConfig(mode="gnn")
        with pytest.raises(ValueError):
            EmbedConfig(schedule="step")

    def test_cosine_schedule(self):
        cfg = EmbedConfig(steps=100, learning_rate=1.0)
        assert cfg.rate(0) == 1.0 and cfg.rate(50) == pytest.approx(0.5)
        assert EmbedConfig(steps=100, schedule="constant").rate(99) == EmbedConfig().learning_rate
