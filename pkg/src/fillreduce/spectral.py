"""Spectral embedding: exact Fiedler solver and a multigrid graph network.

The network follows a coarsen / convolve / interpolate scheme. The graph is
repeatedly coarsened by heavy-edge matching until two nodes remain; the two
coarse nodes start from indicator features, and features are pushed back to
the fine graph through alternating interpolation and mean-aggregation
convolutions with ``tanh`` activations. A final affine map and a thin QR
give orthonormal columns approximating the smallest Laplacian eigenvectors.

Gradients are derived by hand (reverse mode) so training needs only numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .optim import AdamConfig, adam_init, adam_step
from .sparse import Graph, LaplacianMatrix, laplacian
from .synth import rng

__all__ = [
    "EigenSolveError",
    "MultigridLevel",
    "MultigridHierarchy",
    "GnnWeights",
    "EmbeddingState",
    "EmbedConfig",
    "fiedler_eigen",
    "null_vector",
    "node_direction",
    "fix_signs",
    "coarsen",
    "build_hierarchy",
    "interpolate",
    "restrict_mean",
    "mean_operator",
    "sage_conv",
    "init_weights",
    "mgnn_forward",
    "mgnn_raw",
    "mgnn_loss_and_grad",
    "orthonormalize",
    "spectral_loss",
    "spectral_loss_grad",
    "train_embedding",
    "fiedler_alignment",
]


class EigenSolveError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# exact eigensolver


def null_vector(g: Graph, kind: str) -> np.ndarray:
    """Unit vector spanning the Laplacian null space of a connected graph."""
    if kind == "norm":
        v = np.sqrt(g.degrees.astype(np.float64))
        if not v.any():
            v = np.ones(g.n)
    else:
        v = np.ones(g.n)
    return v / np.linalg.norm(v)


def node_direction(g: Graph, v: np.ndarray, kind: str) -> np.ndarray:
    """Per-node values to sort by.

    For the normalized Laplacian the eigenvector carries a ``sqrt(deg)``
    factor; dividing it out gives the random-walk eigenvector, which is
    the one that varies smoothly along the graph.
    """
    v = np.asarray(v, dtype=np.float64)
    if kind != "norm":
        return v
    d = g.degrees.astype(np.float64)
    return np.where(d > 0, v / np.sqrt(np.where(d > 0, d, 1.0)), v)


def fix_signs(f: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Flip each column so its first entry of non-negligible size is positive."""
    f = np.array(f, dtype=np.float64)
    one_d = f.ndim == 1
    if one_d:
        f = f[:, None]
    for j in range(f.shape[1]):
        col = f[:, j]
        scale = np.abs(col).max() if col.size else 0.0
        if scale == 0:
            continue
        k = int(np.argmax(np.abs(col) > rel_tol * scale))
        if col[k] < 0:
            f[:, j] = -col
    return f[:, 0] if one_d else f


_DENSE_MAX_N = 8


def fiedler_eigen(
    g: Graph,
    lap_kind: str = "unnorm",
    tol: float = 1e-8,
    max_iter: int | None = None,
) -> tuple[float, np.ndarray]:
    """Second-smallest Laplacian eigenpair of a connected graph.

    Shift-invert Lanczos (ARPACK) around a small negative shift. The
    returned vector is unit length, orthogonal to the null vector, and sign
    normalized by :func:`fix_signs`. Raises :class:`EigenSolveError` when
    ``||L v - lambda v|| > tol`` after the solve and one refinement retry.
    """
    if g.n < 2:
        raise ValueError("Fiedler vector needs at least 2 nodes")
    if len(g.components()) > 1:
        raise ValueError("Fiedler vector needs a connected graph; split components first")
    lap = laplacian(g, lap_kind)
    L = lap.matrix
    u = null_vector(g, lap.kind)
    if g.n <= _DENSE_MAX_N:
        w, vecs = np.linalg.eigh(L.toarray())
        return _finish(L, vecs[:, 1], u, tol, float(w[1]))

    v0 = rng(0x5EED).random(g.n) + 0.5
    scale = float(abs(L.diagonal()).max()) or 1.0
    shift = -1e-3 * scale
    best = np.inf
    for ncv in (None, min(g.n - 1, 40)):
        try:
            w, vecs = spla.eigsh(
                L.tocsc(), k=2, sigma=shift, which="LM", v0=v0, tol=0,
                maxiter=max_iter, ncv=ncv,
            )
        except spla.ArpackNoConvergence as exc:
            if exc.eigenvectors.shape[1] < 2:
                continue
            w, vecs = exc.eigenvalues, exc.eigenvectors
        order = np.argsort(w)
        try:
            return _finish(L, vecs[:, order[1]], u, tol, float(w[order[1]]))
        except EigenSolveError as exc:
            best = min(best, exc.residual)
    raise EigenSolveError("Fiedler eigensolve did not converge", best)


def _finish(L, v, u, tol, lam_hint):
    v = v - u * (u @ v)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise EigenSolveError("eigenvector collapsed onto the null space", np.inf)
    v = fix_signs(v / nrm)
    lam = float(v @ (L @ v))
    res = float(np.linalg.norm(L @ v - lam * v))
    if not res <= tol:
        raise EigenSolveError(f"residual above tol {tol:g}", res)
    return lam, v


# ---------------------------------------------------------------------------
# multigrid hierarchy


def coarsen(
    g: Graph, edge_weights: np.ndarray | None = None
) -> tuple[Graph, np.ndarray, np.ndarray]:
    """One level of greedy heavy-edge matching.

    Nodes are visited in ascending id; an unmatched node pairs with its
    unmatched neighbor of largest weight (smaller id wins ties). Returns
    the coarse graph, the fine-to-coarse cluster map and the aggregated
    coarse edge weights (aligned with the coarse graph's ``indices``).
    """
    if g.n < 2:
        raise ValueError("coarsening needs at least 2 nodes")
    w = np.ones(g.indices.size) if edge_weights is None else np.asarray(edge_weights, float)
    if w.shape != g.indices.shape:
        raise ValueError("edge_weights must align with graph indices")
    ip, ix, wl = g.indptr.tolist(), g.indices.tolist(), w.tolist()
    cmap = [-1] * g.n
    nc = 0
    for u in range(g.n):
        if cmap[u] >= 0:
            continue
        best, best_w = -1, -np.inf
        for k in range(ip[u], ip[u + 1]):
            v = ix[k]
            if cmap[v] < 0 and wl[k] > best_w:
                best, best_w = v, wl[k]
        cmap[u] = nc
        if best >= 0:
            cmap[best] = nc
        nc += 1
    cmap_arr = np.asarray(cmap, dtype=np.int64)
    cg, cw = _contract(g, w, cmap_arr, nc)
    return cg, cmap_arr, cw


def _contract(g: Graph, w: np.ndarray, cmap: np.ndarray, nc: int) -> tuple[Graph, np.ndarray]:
    rows = np.repeat(cmap, g.degrees)
    cols = cmap[g.indices]
    keep = rows != cols
    m = sp.coo_matrix((w[keep], (rows[keep], cols[keep])), shape=(nc, nc)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return Graph(nc, m.indptr, m.indices), np.asarray(m.data, dtype=np.float64)


def _force_pairs(cmap: np.ndarray) -> tuple[np.ndarray, int]:
    """Pair leftover singleton clusters by ascending id; relabel compactly."""
    sizes = np.bincount(cmap)
    groups: dict[int, int] = {}
    singles = [u for u in range(cmap.size) if sizes[cmap[u]] == 1]
    merged = cmap.copy()
    for a, b in zip(singles[0::2], singles[1::2]):
        merged[b] = merged[a]
    out = np.empty_like(merged)
    for u, c in enumerate(merged.tolist()):
        if c not in groups:
            groups[c] = len(groups)
        out[u] = groups[c]
    return out, len(groups)


@dataclass(frozen=True)
class MultigridLevel:
    graph: Graph
    cluster_map: np.ndarray | None  # None on the coarsest level


@dataclass(frozen=True)
class MultigridHierarchy:
    levels: tuple[MultigridLevel, ...]
    _means: tuple = field(default=(), repr=False, compare=False)

    @property
    def sizes(self) -> list[int]:
        return [lv.graph.n for lv in self.levels]

    @property
    def coarsest(self) -> Graph:
        return self.levels[-1].graph

    def mean(self, level: int) -> sp.csr_matrix:
        return self._means[level]


def build_hierarchy(g: Graph, min_shrink: float = 0.1) -> MultigridHierarchy:
    """Coarsen repeatedly until at most two nodes remain.

    A level that shrinks by less than ``min_shrink`` (fraction of nodes) has
    its leftover singletons paired by ascending id, which guarantees
    termination for edgeless or star-like graphs.
    """
    if g.n < 2:
        raise ValueError("hierarchy needs at least 2 nodes")
    levels = []
    w = np.ones(g.indices.size)
    cur = g
    while cur.n > 2:
        cg, cmap, cw = coarsen(cur, w)
        if cg.n > (1.0 - min_shrink) * cur.n:
            cmap, nc = _force_pairs(cmap)
            cg, cw = _contract(cur, w, cmap, nc)
        levels.append(MultigridLevel(cur, cmap))
        cur, w = cg, cw
    levels.append(MultigridLevel(cur, None))
    means = tuple(mean_operator(lv.graph) for lv in levels)
    return MultigridHierarchy(tuple(levels), means)


def interpolate(f_coarse: np.ndarray, cluster_map: np.ndarray) -> np.ndarray:
    """Copy each coarse row to the fine nodes of its cluster."""
    cluster_map = np.asarray(cluster_map)
    if cluster_map.size and cluster_map.max() >= f_coarse.shape[0]:
        raise ValueError("cluster_map refers to missing coarse rows")
    return np.asarray(f_coarse)[cluster_map]


def restrict_mean(f_fine: np.ndarray, cluster_map: np.ndarray, n_coarse: int) -> np.ndarray:
    """Cluster-mean restriction, the left inverse of :func:`interpolate`."""
    counts = np.bincount(cluster_map, minlength=n_coarse).astype(np.float64)
    out = np.zeros((n_coarse,) + f_fine.shape[1:])
    np.add.at(out, cluster_map, f_fine)
    return out / counts.reshape((-1,) + (1,) * (f_fine.ndim - 1))


def mean_operator(g: Graph) -> sp.csr_matrix:
    """Row-normalized adjacency; rows of isolated nodes are zero."""
    deg = g.degrees.astype(np.float64)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return (sp.diags(inv) @ g.adjacency_matrix()).tocsr()


def sage_conv(g: Graph | sp.spmatrix, F: np.ndarray, W1: np.ndarray, W2: np.ndarray) -> np.ndarray:
    """``F_i W1 + mean_{j in N(i)} F_j W2``; empty neighborhoods contribute zero."""
    M = mean_operator(g) if isinstance(g, Graph) else g
    F = np.asarray(F, dtype=np.float64)
    if F.shape[0] != M.shape[0]:
        raise ValueError(f"feature rows {F.shape[0]} != node count {M.shape[0]}")
    if W1.shape[0] != F.shape[1] or W2.shape[0] != F.shape[1]:
        raise ValueError("weight input dimension does not match features")
    return F @ W1 + (M @ F) @ W2


# ---------------------------------------------------------------------------
# network weights


@dataclass(frozen=True)
class GnnWeights:
    W1c: np.ndarray
    W2c: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    W: np.ndarray
    b: np.ndarray

    _names = ("W1c", "W2c", "W1", "W2", "W", "b")

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, k) for k in self._names]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, flat: np.ndarray) -> "GnnWeights":
        out, pos = {}, 0
        for name, a in zip(self._names, self.arrays()):
            out[name] = np.asarray(flat[pos : pos + a.size]).reshape(a.shape)
            pos += a.size
        return GnnWeights(**out)


def _glorot(gen: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-a, a, size=(fan_in, fan_out))


def init_weights(d: int = 2, hidden: int = 32, seed: int = 0) -> GnnWeights:
    gen = rng(seed)
    return GnnWeights(
        W1c=_glorot(gen, 2, hidden),
        W2c=_glorot(gen, 2, hidden),
        W1=_glorot(gen, hidden, hidden),
        W2=_glorot(gen, hidden, hidden),
        W=_glorot(gen, hidden, d),
        b=np.zeros(d),
    )


# ---------------------------------------------------------------------------
# forward / backward


def _forward(h: MultigridHierarchy, w: GnnWeights):
    top = len(h.levels) - 1
    X = np.eye(2)
    MX = h.mean(top) @ X
    H = np.tanh(X @ w.W1c + MX @ w.W2c)
    cache = [(X, MX, H)]
    for lvl in range(top - 1, -1, -1):
        X = H[h.levels[lvl].cluster_map]
        MX = h.mean(lvl) @ X
        H = np.tanh(X @ w.W1 + MX @ w.W2)
        cache.append((X, MX, H))
    F = H @ w.W + w.b
    return F, cache


def mgnn_raw(h: MultigridHierarchy, w: GnnWeights) -> np.ndarray:
    """Network output before orthonormalization (n x d)."""
    return _forward(h, w)[0]


def _backward(h: MultigridHierarchy, w: GnnWeights, cache, dF: np.ndarray) -> GnnWeights:
    top = len(h.levels) - 1
    H_last = cache[-1][2]
    dW = H_last.T @ dF
    db = dF.sum(axis=0)
    dH = dF @ w.W.T
    dW1 = np.zeros_like(w.W1)
    dW2 = np.zeros_like(w.W2)
    # walk from the finest level back toward the coarsest
    for step in range(len(cache) - 1, 0, -1):
        lvl = top - step
        X, MX, H = cache[step]
        dZ = dH * (1.0 - H * H)
        dW1 += X.T @ dZ
        dW2 += MX.T @ dZ
        dX = dZ @ w.W1.T + h.mean(lvl).T @ (dZ @ w.W2.T)
        cmap = h.levels[lvl].cluster_map
        n_coarse = h.levels[lvl + 1].graph.n
        dH = np.zeros((n_coarse, dX.shape[1]))
        np.add.at(dH, cmap, dX)
    X, MX, H = cache[0]
    dZ = dH * (1.0 - H * H)
    return GnnWeights(
        W1c=X.T @ dZ, W2c=MX.T @ dZ, W1=dW1, W2=dW2, W=dW, b=db
    )


def orthonormalize(F: np.ndarray, lap=None) -> np.ndarray:
    """Thin QR with each column's first non-negligible entry made positive.

    When ``lap`` is given, the orthonormal basis is additionally rotated
    within its span (Rayleigh-Ritz) so that column ``i`` carries the
    ``i``-th smallest Ritz value. The result then depends only on the
    column span of ``F``.
    """
    q, _ = np.linalg.qr(np.asarray(F, dtype=np.float64))
    if lap is not None:
        L = _lap_matrix(lap)
        small = q.T @ (L @ q)
        _, U = np.linalg.eigh(0.5 * (small + small.T))
        q = q @ U
    return fix_signs(q)


def _lap_matrix(lap) -> sp.csr_matrix:
    return lap.matrix if isinstance(lap, LaplacianMatrix) else sp.csr_matrix(lap)


def spectral_loss(
    lap, F_raw: np.ndarray, rho: float = 1.0, orthonormalize_first: bool = False
) -> tuple[float, np.ndarray]:
    """Eigen-residual loss ``||L F - F Lambda||^2 + sum(lambda) + rho ||F^T F - I||^2``.

    ``Lambda = diag(f_i^T L f_i)``. With ``orthonormalize_first`` the
    features are QR-orthonormalized and the penalty term vanishes.
    """
    L = _lap_matrix(lap)
    F = np.asarray(F_raw, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] != L.shape[0]:
        raise ValueError("F must be n x d")
    if orthonormalize_first:
        F = orthonormalize(F, L)
    LF = L @ F
    lam = np.einsum("ij,ij->j", F, LF)
    R = LF - F * lam
    loss = float(np.sum(R * R) + lam.sum())
    if not orthonormalize_first:
        G = F.T @ F - np.eye(F.shape[1])
        loss += rho * float(np.sum(G * G))
    return loss, lam


def spectral_loss_grad(
    lap, F: np.ndarray, rho: float = 1.0, flow_lambda: bool = True
) -> tuple[float, np.ndarray, np.ndarray]:
    """Penalty-form loss, approximate eigenvalues and d(loss)/dF.

    With ``flow_lambda=False`` the eigenvalue estimates are treated as
    constants inside the residual term.
    """
    L = _lap_matrix(lap)
    F = np.asarray(F, dtype=np.float64)
    LF = L @ F
    lam = np.einsum("ij,ij->j", F, LF)
    R = LF - F * lam
    G = F.T @ F - np.eye(F.shape[1])
    loss = float(np.sum(R * R) + lam.sum() + rho * np.sum(G * G))
    dF = 2.0 * (L @ R - R * lam) + 2.0 * LF + 4.0 * rho * (F @ G)
    if flow_lambda:
        dF -= 4.0 * np.einsum("ij,ij->j", R, F) * LF
    return loss, lam, dF


def mgnn_loss_and_grad(
    h: MultigridHierarchy, w: GnnWeights, lap, rho: float = 1.0, flow_lambda: bool = True
) -> tuple[float, GnnWeights]:
    F, cache = _forward(h, w)
    loss, _, dF = spectral_loss_grad(lap, F, rho, flow_lambda)
    return loss, _backward(h, w, cache, dF)


@dataclass(frozen=True)
class EmbeddingState:
    F: np.ndarray
    lambdas: np.ndarray
    residual: float
    hierarchy: MultigridHierarchy | None = None
    weights: GnnWeights | None = None
    history: tuple[float, ...] = ()

    @property
    def loss(self) -> float:
        return self.residual**2 + float(self.lambdas.sum())


def _state_from(lap, F, **extra) -> EmbeddingState:
    L = _lap_matrix(lap)
    LF = L @ F
    lam = np.einsum("ij,ij->j", F, LF)
    res = float(np.linalg.norm(LF - F * lam))
    return EmbeddingState(F, lam, res, **extra)


def mgnn_forward(
    h: MultigridHierarchy, w: GnnWeights, d: int | None = None, lap_kind: str = "norm"
) -> EmbeddingState:
    """Run the network and orthonormalize its output."""
    if d is not None and w.W.shape[1] != d:
        raise ValueError(f"weights produce {w.W.shape[1]} columns, expected {d}")
    lap = laplacian(h.levels[0].graph, lap_kind)
    F = orthonormalize(mgnn_raw(h, w), lap)
    return _state_from(lap, F, hierarchy=h, weights=w)


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class EmbedConfig:
    mode: str = "eig"
    d: int = 2
    steps: int = 5000
    learning_rate: float = 5e-3
    beta2: float = 0.99
    schedule: str = "cosine"
    rho: float = 1.0
    lap: str = "norm"
    hidden: int = 32
    seed: int = 0
    flow_lambda: bool = True
    tol: float = 1e-8
    max_iter: int | None = None

    def __post_init__(self):
        if self.mode not in ("eig", "direct", "mgnn"):
            raise ValueError(f"unknown embedding mode {self.mode!r}")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def rate(self, step: int) -> float:
        if self.schedule == "constant" or self.steps == 0:
            return self.learning_rate
        return self.learning_rate * 0.5 * (1.0 + np.cos(np.pi * step / self.steps))


def train_embedding(g: Graph, config: EmbedConfig = EmbedConfig()) -> EmbeddingState:
    """Stage-one embedding of a graph (column 1 trivial, column 2 Fiedler-like).

    ``eig`` solves the eigenproblem exactly; ``direct`` fits the feature
    matrix itself with Adam; ``mgnn`` fits the multigrid network weights.
    """
    if g.n < 2:
        raise ValueError("embedding needs at least 2 nodes")
    lap = laplacian(g, config.lap)
    if config.mode == "eig":
        if config.d != 2:
            raise ValueError("eig mode returns exactly two columns")
        _, v = fiedler_eigen(g, config.lap, tol=config.tol, max_iter=config.max_iter)
        F = np.column_stack([null_vector(g, lap.kind), v])
        return _state_from(lap, F)

    history = []

    def adam(step: int) -> AdamConfig:
        return AdamConfig(learning_rate=config.rate(step), beta2=config.beta2)

    if config.mode == "direct":
        F0 = rng(config.seed).standard_normal((g.n, config.d)) / np.sqrt(g.n)
        state = adam_init(F0.ravel())
        for step in range(config.steps):
            F = state.params.reshape(g.n, config.d)
            loss, _, dF = spectral_loss_grad(lap, F, config.rho, config.flow_lambda)
            if not np.isfinite(loss):
                raise FloatingPointError("non-finite embedding loss")
            history.append(loss)
            state = adam_step(state, dF.ravel(), adam(step))
        F = orthonormalize(state.params.reshape(g.n, config.d), lap)
        return _state_from(lap, F, history=tuple(history))

    h = build_hierarchy(g)
    w = init_weights(config.d, config.hidden, config.seed)
    state = adam_init(w.flatten())
    for step in range(config.steps):
        cur = w.unflatten(state.params)
        loss, grads = mgnn_loss_and_grad(h, cur, lap, config.rho, config.flow_lambda)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite embedding loss")
        history.append(loss)
        state = adam_step(state, grads.flatten(), adam(step))
    w = w.unflatten(state.params)
    F = orthonormalize(mgnn_raw(h, w), lap)
    return _state_from(lap, F, hierarchy=h, weights=w, history=tuple(history))


def fiedler_alignment(g: Graph, f: np.ndarray, lap_kind: str = "norm", rel_gap: float = 1e-6) -> float:
    """Largest absolute cosine between ``f`` and any Fiedler eigenvector.

    Computed as the norm of the projection of ``f / ||f||`` onto the
    eigenspace of the second-smallest eigenvalue (dense solve; small graphs).
    For a simple eigenvalue this is ``|cos(f, v2)|``.
    """
    L = laplacian(g, lap_kind).matrix.toarray()
    w, V = scipy.linalg.eigh(L)
    lam2 = w[1]
    span = V[:, np.abs(w - lam2) <= rel_gap * max(1.0, abs(w[-1]))]
    f = np.asarray(f, dtype=np.float64)
    f = f / np.linalg.norm(f)
    return float(np.linalg.norm(span.T @ f))


