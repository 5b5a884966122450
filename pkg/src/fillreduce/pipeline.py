"""Two-stage unsupervised ordering: spectral embedding, then score descent.

Stage one embeds each connected component (exact Fiedler vector by
default). Stage two rescales the Fiedler direction into node scores and
runs Adam on the expected 1-sum. The best scores seen are turned into an
elimination order, highest score first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optim import AdamConfig, AdamState, adam_init, adam_step
from .rank import NodeScores, expected_one_sum_and_grad
from .sparse import Graph, Permutation, SparsePattern, pattern_to_graph, permutation_from_scores
from .spectral import EmbedConfig, EmbeddingState, node_direction, train_embedding
from .synth import rng

__all__ = [
    "OptimizerConfig",
    "OptimizeTrace",
    "OptimizationAborted",
    "adam_step",
    "AdamState",
    "init_scores",
    "optimize_scores",
    "udno_order",
]


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-4
    steps: int = 300
    sigma: float = 1e-4
    sigma_is_variance: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init: str = "fiedler"
    kappa: float = 2.0
    seed: int = 0
    stage1: str = "eig"
    lap: str = "norm"
    embed_steps: int = 5000
    embed_learning_rate: float = 5e-3
    reverse: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.init not in ("fiedler", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.stage1 not in ("eig", "direct", "mgnn"):
            raise ValueError(f"unknown stage1 mode {self.stage1!r}")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def noise_std(self) -> float:
        return float(np.sqrt(self.sigma)) if self.sigma_is_variance else self.sigma

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.learning_rate, self.beta1, self.beta2, self.eps)

    def embed_config(self) -> EmbedConfig:
        return EmbedConfig(
            mode=self.stage1,
            steps=self.embed_steps,
            learning_rate=self.embed_learning_rate,
            lap=self.lap,
            seed=self.seed,
        )


@dataclass
class OptimizeTrace:
    losses: list[float]
    initial_scores: np.ndarray
    final_scores: np.ndarray
    initial_loss: float
    final_loss: float
    best_step: int = 0
    components: list["OptimizeTrace"] = field(default_factory=list)


class OptimizationAborted(FloatingPointError):
    def __init__(self, message: str, trace: OptimizeTrace):
        super().__init__(message)
        self.trace = trace


def init_scores(
    embedding: EmbeddingState | np.ndarray | None, g: Graph, config: OptimizerConfig
) -> NodeScores:
    """Initial scores whose sorted values have mean gap ``kappa * sigma``.

    ``fiedler`` init rescales the second embedding column; ``random`` init
    draws ``N(0, (kappa * sigma * n / 2)^2)`` from the config seed.
    """
    sigma = config.noise_std
    n = g.n
    if n <= 1:
        return NodeScores(np.zeros(n), sigma)
    if config.init == "random":
        sd = config.kappa * sigma * n / 2.0
        return NodeScores(rng(config.seed).normal(0.0, sd, n), sigma)
    if embedding is None:
        raise ValueError("fiedler init needs an embedding")
    F = embedding.F if isinstance(embedding, EmbeddingState) else np.asarray(embedding)
    if F.ndim != 2 or F.shape[1] < 2 or F.shape[0] != n:
        raise ValueError("embedding must be n x d with d >= 2")
    v = node_direction(g, F[:, 1], config.lap)
    v = v - v.mean()
    spread = float(v.max() - v.min())
    if spread == 0:
        return NodeScores(np.zeros(n), sigma)
    return NodeScores(v * (config.kappa * sigma * (n - 1) / spread), sigma)


def optimize_scores(g: Graph, init: NodeScores, config: OptimizerConfig) -> OptimizeTrace:
    """Adam on the expected 1-sum; returns the best scores seen."""
    sigma = init.sigma
    state = adam_init(init.f)
    loss, grad = expected_one_sum_and_grad(g, init)
    losses = [loss]
    best_loss, best_f, best_step = loss, init.f.copy(), 0
    adam = config.adam

    def trace() -> OptimizeTrace:
        return OptimizeTrace(losses, init.f.copy(), best_f, losses[0], best_loss, best_step)

    if not np.isfinite(loss):
        raise OptimizationAborted("non-finite initial loss", trace())
    for step in range(1, config.steps + 1):
        try:
            state = adam_step(state, grad, adam)
        except FloatingPointError as exc:
            raise OptimizationAborted(str(exc), trace()) from exc
        if not np.all(np.isfinite(state.params)):
            raise OptimizationAborted("non-finite scores", trace())
        loss, grad = expected_one_sum_and_grad(g, NodeScores(state.params, sigma))
        if not np.isfinite(loss):
            raise OptimizationAborted(f"non-finite loss at step {step}", trace())
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_f, best_step = loss, state.params.copy(), step
    return trace()


def udno_order(p: SparsePattern | Graph, config: OptimizerConfig = OptimizerConfig()):
    """Full two-stage ordering; returns ``(Permutation, OptimizeTrace)``.

    Components are handled independently and placed largest first.
    """
    g = p if isinstance(p, Graph) else pattern_to_graph(p)
    comps = sorted(g.components(), key=lambda c: -c.size)
    final = np.zeros(g.n)
    initial = np.zeros(g.n)
    seq: list[int] = []
    traces: list[OptimizeTrace] = []
    for comp in comps:
        if comp.size == 1:
            seq.append(int(comp[0]))
            continue
        sub = g.subgraph(comp)
        emb = None
        if config.init == "fiedler":
            emb = train_embedding(sub, config.embed_config())
        start = init_scores(emb, sub, config)
        if config.reverse:
            start = NodeScores(-start.f, start.sigma)
        tr = optimize_scores(sub, start, config)
        traces.append(tr)
        final[comp] = tr.final_scores
        initial[comp] = tr.initial_scores
        local = permutation_from_scores(tr.final_scores)
        seq.extend(comp[local.new_to_old].tolist())

    steps = config.steps + 1
    losses = [0.0] * steps
    for tr in traces:
        # early-aborted components never reach here; all traces share a length
        for k in range(min(steps, len(tr.losses))):
            losses[k] += tr.losses[k]
    total = OptimizeTrace(
        losses=losses,
        initial_scores=initial,
        final_scores=final,
        initial_loss=float(sum(t.initial_loss for t in traces)),
        final_loss=float(sum(t.final_loss for t in traces)),
        components=traces,
    )
    return Permutation(np.asarray(seq, dtype=np.int64)), total
