"""Classical fill-reducing orderings used as baselines and initializers."""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np

from .sparse import Graph, Permutation
from .spectral import fiedler_eigen, node_direction

__all__ = [
    "natural_order",
    "rcm_order",
    "min_degree_order",
    "fiedler_order",
    "spectral_nd_order",
    "pseudo_peripheral_node",
    "METHODS",
]


def natural_order(n: int) -> Permutation:
    if n < 1:
        raise ValueError("natural_order needs n >= 1")
    return Permutation.identity(n)


def _bfs_levels(adj: list[list[int]], start: int) -> list[list[int]]:
    seen = {start}
    levels = [[start]]
    while True:
        nxt = []
        for u in levels[-1]:
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            return levels
        levels.append(nxt)


def pseudo_peripheral_node(g: Graph, component: np.ndarray) -> int:
    """Repeated BFS from a minimum-degree node until eccentricity stops growing."""
    return _pseudo_peripheral(g.adjacency_lists(), g.degrees.tolist(), component.tolist())


def _pseudo_peripheral(adj: list[list[int]], deg: list[int], comp: list[int]) -> int:
    start = min(comp, key=lambda u: (deg[u], u))
    ecc = len(_bfs_levels(adj, start))
    for _ in range(len(comp)):
        last = _bfs_levels(adj, start)[-1]
        cand = min(last, key=lambda u: (deg[u], u))
        cecc = len(_bfs_levels(adj, cand))
        if cecc <= ecc:
            break
        start, ecc = cand, cecc
    return start


def rcm_order(g: Graph) -> Permutation:
    """Reverse Cuthill-McKee.

    Each component (in ascending order of its smallest id) is walked
    breadth-first from a pseudo-peripheral node, enqueueing unvisited
    neighbors by ascending degree then id. The concatenated sequence is
    reversed.
    """
    adj = g.adjacency_lists()
    deg = g.degrees.tolist()
    visited = [False] * g.n
    seq: list[int] = []
    for comp in g.components():
        start = _pseudo_peripheral(adj, deg, comp.tolist())
        visited[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            seq.append(u)
            nb = [v for v in adj[u] if not visited[v]]
            nb.sort(key=lambda v: (deg[v], v))
            for v in nb:
                visited[v] = True
                queue.append(v)
    return Permutation(np.asarray(seq[::-1], dtype=np.int64))


def min_degree_order(g: Graph) -> Permutation:
    """Exact minimum degree on the evolving elimination graph (ties by id)."""
    adj = [set(nb) for nb in g.adjacency_lists()]
    heap = [(len(a), u) for u, a in enumerate(adj)]
    heapq.heapify(heap)
    done = [False] * g.n
    order = []
    while heap:
        d, u = heapq.heappop(heap)
        if done[u] or d != len(adj[u]):
            continue
        done[u] = True
        order.append(u)
        nbrs = adj[u]
        for v in nbrs:
            av = adj[v]
            av.discard(u)
            av.update(nbrs)
            av.discard(v)
            heapq.heappush(heap, (len(av), v))
        adj[u] = set()
    return Permutation(np.asarray(order, dtype=np.int64))


def _components_largest_first(g: Graph) -> list[np.ndarray]:
    comps = g.components()
    return sorted(comps, key=lambda c: -c.size)  # stable: ties keep smallest-id order


def fiedler_order(g: Graph, lap_kind: str = "unnorm", tol: float = 1e-8) -> Permutation:
    """Sort each component by its Fiedler vector (ascending, ties by id).

    Components are placed largest first.
    """
    seq = []
    for comp in _components_largest_first(g):
        if comp.size <= 1:
            seq.extend(comp.tolist())
            continue
        sub = g.subgraph(comp)
        _, v = fiedler_eigen(sub, lap_kind, tol=tol)
        v = node_direction(sub, v, lap_kind)
        seq.extend(comp[np.lexsort((comp, v))].tolist())
    return Permutation(np.asarray(seq, dtype=np.int64))


def _greedy_cover(cut: list[tuple[int, int]]) -> list[int]:
    """Vertex cover of ``cut`` taking the most-covering endpoint first (ties by id)."""
    incident: dict[int, set[int]] = {}
    for k, (a, b) in enumerate(cut):
        incident.setdefault(a, set()).add(k)
        incident.setdefault(b, set()).add(k)
    heap = [(-len(s), u) for u, s in incident.items()]
    heapq.heapify(heap)
    cover = []
    while heap:
        negc, u = heapq.heappop(heap)
        edges = incident[u]
        if not edges:
            continue
        if -negc != len(edges):
            heapq.heappush(heap, (-len(edges), u))
            continue
        cover.append(u)
        for k in list(edges):
            a, b = cut[k]
            other = b if a == u else a
            incident[other].discard(k)
        edges.clear()
    return cover


def spectral_nd_order(g: Graph, leaf_size: int = 8, lap_kind: str = "unnorm") -> Permutation:
    """Spectral nested dissection.

    Each connected piece larger than ``leaf_size`` is split at the median of
    its Fiedler vector; a greedy vertex cover of the cut edges becomes the
    separator. Pieces are ordered ``[left, right, separator]`` and leaves
    are ordered by minimum degree.
    """
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")

    def leaf(nodes: np.ndarray) -> list[int]:
        local = min_degree_order(g.subgraph(nodes))
        return nodes[local.new_to_old].tolist()

    def dissect(nodes: np.ndarray) -> list[int]:
        if nodes.size == 0:
            return []
        if nodes.size <= leaf_size:
            return leaf(nodes)
        sub = g.subgraph(nodes)
        comps = sub.components()
        if len(comps) > 1:
            out = []
            for c in comps:
                out.extend(dissect(nodes[c]))
            return out
        _, v = fiedler_eigen(sub, lap_kind, tol=1e-6)
        v = node_direction(sub, v, lap_kind)
        local_sorted = np.lexsort((np.arange(sub.n), v))
        half = sub.n // 2
        side = np.zeros(sub.n, dtype=bool)
        side[local_sorted[half:]] = True
        e = sub.edges()
        crossing = e[side[e[:, 0]] != side[e[:, 1]]]
        cut = [(int(nodes[a]), int(nodes[b])) for a, b in crossing]
        sep = sorted(_greedy_cover(cut))
        in_sep = np.isin(nodes, sep)
        left = nodes[~side & ~in_sep]
        right = nodes[side & ~in_sep]
        return dissect(left) + dissect(right) + sep

    seq = dissect(np.arange(g.n, dtype=np.int64))
    return Permutation(np.asarray(seq, dtype=np.int64))


METHODS = ("natural", "rcm", "mindeg", "fiedler", "snd", "udno")
