"""Deterministic synthetic test matrices.

Grid stencils (2D 5-point, 2D 9-point, 3D 7-point) and random geometric
graphs on the unit square. All randomness comes from numpy's ``PCG64``
bit generator seeded with the GenSpec seed, so outputs are reproducible
across platforms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .sparse import Graph, Permutation, SparsePattern, apply_permutation, graph_to_pattern

__all__ = ["GenSpec", "generate", "generate_graph", "random_permute", "rng", "standard_suite"]

FAMILIES = ("grid2d-5pt", "grid2d-9pt", "grid3d-7pt", "random-geometric")


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class GenSpec:
    family: str
    k: int = 0
    n: int = 0
    radius: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "random-geometric":
            if self.n < 1:
                raise ValueError("random-geometric needs n >= 1")
            if self.radius < 0:
                raise ValueError("radius must be non-negative")
        elif self.k < 1:
            raise ValueError("grid families need k >= 1")

    @property
    def name(self) -> str:
        if self.family == "random-geometric":
            return f"rgg_n{self.n}_r{self.radius:.4g}_s{self.seed}"
        return f"{self.family}_k{self.k}"

    @classmethod
    def parse(cls, text: str) -> "GenSpec":
        """Parse ``family:key=value,...`` e.g. ``grid2d-5pt:k=10``."""
        family, _, rest = text.partition(":")
        kwargs: dict = {}
        for item in filter(None, rest.split(",")):
            key, _, value = item.partition("=")
            key = key.strip()
            if key == "radius":
                kwargs[key] = float(value)
            elif key in ("k", "n", "seed"):
                kwargs[key] = int(value)
            else:
                raise ValueError(f"unknown generator parameter {key!r}")
        return cls(family.strip(), **kwargs)


def _grid_edges(shape: tuple[int, ...], offsets) -> list[np.ndarray]:
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    out = []
    for off in offsets:
        src = tuple(slice(0, s - o) if o >= 0 else slice(-o, s) for s, o in zip(shape, off))
        dst = tuple(slice(o, s) if o >= 0 else slice(0, s + o) for s, o in zip(shape, off))
        out.append(np.column_stack([idx[src].ravel(), idx[dst].ravel()]))
    return out


def generate_graph(spec: GenSpec) -> Graph:
    if spec.family == "grid2d-5pt":
        edges = _grid_edges((spec.k, spec.k), [(0, 1), (1, 0)])
        n = spec.k**2
    elif spec.family == "grid2d-9pt":
        edges = _grid_edges((spec.k, spec.k), [(0, 1), (1, 0), (1, 1), (1, -1)])
        n = spec.k**2
    elif spec.family == "grid3d-7pt":
        edges = _grid_edges((spec.k,) * 3, [(0, 0, 1), (0, 1, 0), (1, 0, 0)])
        n = spec.k**3
    else:
        n = spec.n
        pts = rng(spec.seed).random((n, 2))
        edges = []
        if spec.radius > 0 and n > 1:
            pairs = cKDTree(pts).query_pairs(spec.radius, output_type="ndarray")
            d = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
            edges = [pairs[d < spec.radius]]
    allv = np.concatenate(edges) if edges else np.empty((0, 2), dtype=np.int64)
    return Graph.from_edges(n, allv)


def generate(spec: GenSpec) -> SparsePattern:
    """Symmetric pattern with a full diagonal for the given generator spec."""
    return graph_to_pattern(generate_graph(spec), diagonal=True)


def random_permute(p: SparsePattern, seed: int) -> tuple[SparsePattern, Permutation]:
    """Scramble ``p`` by a uniformly random permutation drawn from ``seed``."""
    perm = Permutation(rng(seed).permutation(p.n))
    return apply_permutation(p, perm), perm


def rgg_radius(n: int, mean_degree: float = 8.0) -> float:
    """Radius giving roughly ``mean_degree`` neighbors for n uniform points."""
    return float(np.sqrt(mean_degree / (np.pi * n)))


def standard_suite() -> list[tuple[str, SparsePattern]]:
    """Fixed 50-instance suite: scrambled 2D grids and random geometric graphs.

    25 scrambled 5-point grids with k = 8..20 (two seeds per k, one for
    k = 20) and 25 random geometric graphs with n spread over 100..1000 at
    mean degree about 8. Seeds are pinned.
    """
    out = []
    grid_ks = list(itertools.chain.from_iterable((k, k) for k in range(8, 20))) + [20]
    for i, k in enumerate(grid_ks):
        base = generate(GenSpec("grid2d-5pt", k=k))
        scrambled, _ = random_permute(base, seed=1000 + i)
        out.append((f"grid2d-5pt_k{k}_scr{i}", scrambled))
    for i, n in enumerate(np.linspace(100, 1000, 25).round().astype(int).tolist()):
        spec = GenSpec("random-geometric", n=n, radius=rgg_radius(n), seed=2000 + i)
        out.append((spec.name, generate(spec)))
    return out
