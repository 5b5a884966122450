"""Sparse pattern containers, Matrix Market I/O, graphs and permutations.

Everything here is immutable after construction. Patterns are stored in
compressed-row layout with sorted column indices so that neighbor scans are
O(deg) and iteration order is deterministic.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MatrixMarketError",
    "SparsePattern",
    "Graph",
    "Permutation",
    "LaplacianMatrix",
    "parse_matrix_market",
    "read_matrix_market",
    "write_matrix_market",
    "symmetrize_pattern",
    "pattern_to_graph",
    "graph_to_pattern",
    "laplacian",
    "apply_permutation",
    "permutation_from_scores",
    "read_permutation",
    "write_permutation",
]


class MatrixMarketError(ValueError):
    """Raised for malformed or unsupported Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SparsePattern:
    """Square sparsity structure in CSR layout.

    ``values`` is optional; when present it is aligned with ``col_ids``.
    """

    n: int
    row_starts: np.ndarray
    col_ids: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        rs = np.array(self.row_starts, dtype=np.int64)
        ci = np.array(self.col_ids, dtype=np.int64)
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if rs.shape != (self.n + 1,) or rs[0] != 0 or rs[-1] != ci.size:
            raise ValueError("row_starts must have n+1 offsets spanning col_ids")
        if np.any(np.diff(rs) < 0):
            raise ValueError("row_starts must be non-decreasing")
        if ci.size and (ci.min() < 0 or ci.max() >= self.n):
            raise ValueError("column index out of range")
        # strictly increasing within each row: sorted and duplicate free
        if ci.size > 1:
            d = np.diff(ci)
            row_break = np.zeros(ci.size - 1, dtype=bool)
            inner = rs[1:-1]
            inner = inner[(inner > 0) & (inner < ci.size)]
            row_break[inner - 1] = True
            if np.any((d <= 0) & ~row_break):
                raise ValueError("columns must be sorted and unique within each row")
        object.__setattr__(self, "row_starts", _freeze(rs))
        object.__setattr__(self, "col_ids", _freeze(ci))
        if self.values is not None:
            v = np.array(self.values, dtype=np.float64)
            if v.shape != ci.shape:
                raise ValueError("values must align with col_ids")
            object.__setattr__(self, "values", _freeze(v))

    @property
    def nnz(self) -> int:
        return int(self.col_ids.size)

    def row(self, i: int) -> np.ndarray:
        return self.col_ids[self.row_starts[i] : self.row_starts[i + 1]]

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry (COO rows)."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_starts))

    def entries(self) -> set[tuple[int, int]]:
        return set(zip(self.row_ids().tolist(), self.col_ids.tolist()))

    def is_symmetric(self) -> bool:
        rows = self.row_ids()
        a = np.lexsort((self.col_ids, rows))
        b = np.lexsort((rows, self.col_ids))
        return bool(
            np.array_equal(rows[a], self.col_ids[b])
            and np.array_equal(self.col_ids[a], rows[b])
        )

    def to_scipy(self) -> sp.csr_matrix:
        data = self.values if self.values is not None else np.ones(self.nnz)
        return sp.csr_matrix(
            (np.array(data), self.col_ids.copy(), self.row_starts.copy()),
            shape=(self.n, self.n),
        )

    def to_dense(self) -> np.ndarray:
        """Boolean structure as a dense array (small n only)."""
        out = np.zeros((self.n, self.n), dtype=bool)
        out[self.row_ids(), self.col_ids] = True
        return out

    @classmethod
    def from_coo(
        cls,
        n: int,
        rows: Iterable[int],
        cols: Iterable[int],
        values: Iterable[float] | None = None,
    ) -> "SparsePattern":
        """Build from coordinates; duplicate coordinates are merged (values summed)."""
        r = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
        c = np.asarray(list(cols) if not isinstance(cols, np.ndarray) else cols, dtype=np.int64)
        if r.shape != c.shape:
            raise ValueError("rows and cols differ in length")
        if r.size and (min(r.min(), c.min()) < 0 or max(r.max(), c.max()) >= n):
            raise ValueError("coordinate out of range")
        v = None
        if values is not None:
            v = np.asarray(
                list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64
            )
        order = np.lexsort((c, r))
        r, c = r[order], c[order]
        if v is not None:
            v = v[order]
        if r.size:
            keep = np.ones(r.size, dtype=bool)
            keep[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            if v is not None and not keep.all():
                v = np.add.reduceat(v, np.flatnonzero(keep))
            r, c = r[keep], c[keep]
        rs = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=n), out=rs[1:])
        return cls(n, rs, c, v)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsePattern):
            return NotImplemented
        if self.n != other.n or not np.array_equal(self.row_starts, other.row_starts):
            return False
        if not np.array_equal(self.col_ids, other.col_ids):
            return False
        if (self.values is None) != (other.values is None):
            return False
        return self.values is None or np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with sorted CSR neighbor lists."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    _degrees: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ip = np.array(self.indptr, dtype=np.int64)
        ix = np.array(self.indices, dtype=np.int64)
        if ip.shape != (self.n + 1,) or ip[0] != 0 or ip[-1] != ix.size:
            raise ValueError("indptr must have n+1 offsets spanning indices")
        deg = np.diff(ip)
        if np.any(deg < 0):
            raise ValueError("indptr must be non-decreasing")
        object.__setattr__(self, "indptr", _freeze(ip))
        object.__setattr__(self, "indices", _freeze(ix))
        object.__setattr__(self, "_degrees", _freeze(deg))

    @property
    def edge_count(self) -> int:
        return int(self.indices.size // 2)

    def validate(self) -> None:
        """Check sortedness, absence of self-loops and neighbor symmetry."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self._degrees)
        if np.any(rows == self.indices):
            raise ValueError("self-loop present")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ValueError("neighbor id out of range")
        key = rows * max(self.n, 1) + self.indices
        if np.any(np.diff(key) <= 0):
            raise ValueError("neighbor lists must be sorted and duplicate free")
        tkey = np.sort(self.indices * max(self.n, 1) + rows)
        if not np.array_equal(key, tkey):
            raise ValueError("neighbor lists are not mutually consistent")

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def adjacency_lists(self) -> list[list[int]]:
        ix = self.indices.tolist()
        ip = self.indptr.tolist()
        return [ix[ip[i] : ip[i + 1]] for i in range(self.n)]

    def edges(self) -> np.ndarray:
        """(|E|, 2) array of edges with u < v, sorted lexicographically."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self._degrees)
        mask = rows < self.indices
        return np.column_stack([rows[mask], self.indices[mask]])

    def adjacency_matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.ones(self.indices.size), self.indices.copy(), self.indptr.copy()),
            shape=(self.n, self.n),
        )

    def subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Induced subgraph; node k of the result is ``nodes[k]``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        local = np.full(self.n, -1, dtype=np.int64)
        local[nodes] = np.arange(nodes.size)
        rows, cols = [], []
        for k, u in enumerate(nodes.tolist()):
            nb = local[self.neighbors(u)]
            nb = nb[nb >= 0]
            rows.append(np.full(nb.size, k, dtype=np.int64))
            cols.append(nb)
        if not rows:
            return Graph.from_edges(0, [])
        return Graph._from_directed(nodes.size, np.concatenate(rows), np.concatenate(cols))

    def components(self) -> list[np.ndarray]:
        """Connected components, each sorted, listed by ascending smallest id."""
        if self.n == 0:
            return []
        ncomp, labels = sp.csgraph.connected_components(self.adjacency_matrix(), directed=False)
        comps: list[list[int]] = [[] for _ in range(ncomp)]
        for u, lab in enumerate(labels.tolist()):
            comps[lab].append(u)
        comps.sort(key=lambda c: c[0])
        return [np.asarray(c, dtype=np.int64) for c in comps]

    @classmethod
    def _from_directed(cls, n: int, rows: np.ndarray, cols: np.ndarray) -> "Graph":
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        ip = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=ip[1:])
        return cls(n, ip, cols)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build from an undirected edge list; duplicates and self-loops are dropped."""
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        e = e[e[:, 0] != e[:, 1]]
        lo, hi = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
        if lo.size:
            key = np.unique(lo * n + hi)
            lo, hi = key // n, key % n
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        return cls._from_directed(n, rows, cols)


@dataclass(frozen=True)
class Permutation:
    """Elimination ordering.

    ``new_to_old[k]`` is the original node eliminated at position ``k``;
    ``old_to_new`` is its inverse (the position of each original node).
    """

    new_to_old: np.ndarray
    old_to_new: np.ndarray = field(init=False)

    def __post_init__(self):
        p = np.array(self.new_to_old, dtype=np.int64).reshape(-1)
        n = p.size
        inv = np.full(n, -1, dtype=np.int64)
        if n and (p.min() < 0 or p.max() >= n):
            raise ValueError("permutation entry out of range")
        inv[p] = np.arange(n, dtype=np.int64)
        if np.any(inv < 0):
            raise ValueError("not a bijection")
        object.__setattr__(self, "new_to_old", _freeze(p))
        object.__setattr__(self, "old_to_new", _freeze(inv))

    @property
    def n(self) -> int:
        return int(self.new_to_old.size)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def from_old_to_new(cls, old_to_new: Sequence[int]) -> "Permutation":
        return cls(Permutation(np.asarray(old_to_new)).old_to_new)

    def inverse(self) -> "Permutation":
        return Permutation(self.old_to_new)

    def compose(self, inner: "Permutation") -> "Permutation":
        """Ordering that first applies ``inner`` then ``self`` to the result.

        ``apply(apply(p, inner), self) == apply(p, self.compose(inner))``.
        """
        if inner.n != self.n:
            raise ValueError("size mismatch")
        return Permutation(inner.new_to_old[self.new_to_old])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.new_to_old, other.new_to_old)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class LaplacianMatrix:
    matrix: sp.csr_matrix
    kind: str

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def as_pattern(self) -> SparsePattern:
        m = self.matrix.tocsr()
        m.sort_indices()
        return SparsePattern(m.shape[0], m.indptr, m.indices, m.data)


# ---------------------------------------------------------------------------
# Matrix Market


_SUPPORTED_FIELDS = {"real", "integer", "pattern", "double"}
_SUPPORTED_SYMMETRY = {"general", "symmetric", "skew-symmetric"}


def parse_matrix_market(stream: TextIO | str) -> SparsePattern:
    """Parse a Matrix Market coordinate file into a 0-based pattern.

    Symmetric and skew-symmetric storage is expanded to both triangles.
    Explicit zeros are kept as structural entries. Accepts either a text
    stream or the file contents as a string.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline()
    if not header:
        raise MatrixMarketError("empty input", 1)
    tokens = header.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise MatrixMarketError("malformed header", 1)
    fmt, fld, sym = tokens[2:]
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format '{fmt}'", 1)
    if fld not in _SUPPORTED_FIELDS:
        raise MatrixMarketError(f"unsupported field '{fld}'", 1)
    if sym not in _SUPPORTED_SYMMETRY:
        raise MatrixMarketError(f"unsupported symmetry '{sym}'", 1)
    has_values = fld != "pattern"

    lineno = 1
    size_line = None
    for line in stream:
        lineno += 1
        s = line.strip()
        if s and not s.startswith("%"):
            size_line = s
            break
    if size_line is None:
        raise MatrixMarketError("missing size line", lineno)
    try:
        nrows, ncols, nnz = (int(t) for t in size_line.split())
    except ValueError:
        raise MatrixMarketError("malformed size line", lineno) from None
    if nrows != ncols:
        raise MatrixMarketError(f"matrix is not square ({nrows}x{ncols})", lineno)
    if nrows < 0 or nnz < 0:
        raise MatrixMarketError("negative size", lineno)

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz if has_values else 0, dtype=np.float64)
    k = 0
    need = 3 if has_values else 2
    for line in stream:
        lineno += 1
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) < need:
            raise MatrixMarketError("too few fields in entry", lineno)
        if k >= nnz:
            raise MatrixMarketError("more entries than declared", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            if has_values:
                vals[k] = float(parts[2])
        except ValueError:
            raise MatrixMarketError("non-numeric entry", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range", lineno)
        if sym != "general" and j > i:
            raise MatrixMarketError("upper-triangle entry in symmetric storage", lineno)
        rows[k], cols[k] = i - 1, j - 1
        k += 1
    if k != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {k}", lineno)

    if sym != "general":
        off = rows != cols
        mr, mc = cols[off], rows[off]
        rows = np.concatenate([rows, mr])
        cols = np.concatenate([cols, mc])
        if has_values:
            mv = vals[off] if sym == "symmetric" else -vals[off]
            vals = np.concatenate([vals, mv])
    return SparsePattern.from_coo(nrows, rows, cols, vals if has_values else None)


def read_matrix_market(path) -> SparsePattern:
    with open(path, encoding="utf-8") as fh:
        return parse_matrix_market(fh)


def write_matrix_market(p: SparsePattern, stream: TextIO | None = None) -> str:
    """Serialize as a general coordinate file; returns the text written."""
    fld = "pattern" if p.values is None else "real"
    out = [f"%%MatrixMarket matrix coordinate {fld} general", f"{p.n} {p.n} {p.nnz}"]
    rows = (p.row_ids() + 1).tolist()
    cols = (p.col_ids + 1).tolist()
    if p.values is None:
        out.extend(f"{i} {j}" for i, j in zip(rows, cols))
    else:
        out.extend(f"{i} {j} {v!r}" for i, j, v in zip(rows, cols, p.values.tolist()))
    text = "\n".join(out) + "\n"
    if stream is not None:
        stream.write(text)
    return text


# ---------------------------------------------------------------------------
# structural transforms


def symmetrize_pattern(p: SparsePattern) -> SparsePattern:
    """Structural union of ``p`` and its transpose (values dropped)."""
    rows = p.row_ids()
    return SparsePattern.from_coo(
        p.n, np.concatenate([rows, p.col_ids]), np.concatenate([p.col_ids, rows])
    )


def pattern_to_graph(p: SparsePattern) -> Graph:
    if not p.is_symmetric():
        raise ValueError("pattern is not symmetric; call symmetrize_pattern first")
    rows = p.row_ids()
    off = rows != p.col_ids
    # CSR order is already sorted by (row, col)
    counts = np.bincount(rows[off], minlength=p.n)
    ip = np.zeros(p.n + 1, dtype=np.int64)
    np.cumsum(counts, out=ip[1:])
    return Graph(p.n, ip, p.col_ids[off])


def graph_to_pattern(g: Graph, diagonal: bool = True) -> SparsePattern:
    """Pattern of the graph's adjacency, with a full diagonal by default."""
    rows = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
    cols = g.indices
    if diagonal:
        d = np.arange(g.n, dtype=np.int64)
        rows, cols = np.concatenate([rows, d]), np.concatenate([cols, d])
    return SparsePattern.from_coo(g.n, rows, cols)


def laplacian(g: Graph, kind: str = "unnorm") -> LaplacianMatrix:
    """Graph Laplacian ``D - A`` or ``D^-1/2 (D - A) D^-1/2``.

    Isolated nodes get a zero diagonal in both kinds.
    """
    kind = _lap_kind(kind)
    a = g.adjacency_matrix()
    deg = g.degrees.astype(np.float64)
    lap = (sp.diags(deg) - a).tocsr()
    if kind == "norm":
        with np.errstate(divide="ignore"):
            s = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
        lap = (sp.diags(s) @ lap @ sp.diags(s)).tocsr()
    lap.sort_indices()
    return LaplacianMatrix(lap, kind)


def _lap_kind(kind: str) -> str:
    aliases = {"unnorm": "unnorm", "unnormalized": "unnorm", "norm": "norm",
               "normalized": "norm", "symmetric-normalized": "norm"}
    try:
        return aliases[kind]
    except KeyError:
        raise ValueError(f"unknown Laplacian kind {kind!r}") from None


def apply_permutation(p: SparsePattern, perm: Permutation) -> SparsePattern:
    """Return ``P A P^T``: entry (i, j) moves to (pi(i), pi(j))."""
    if perm.n != p.n:
        raise ValueError(f"permutation size {perm.n} != pattern size {p.n}")
    pi = perm.old_to_new
    return SparsePattern.from_coo(p.n, pi[p.row_ids()], pi[p.col_ids], p.values)


def permutation_from_scores(f: Sequence[float]) -> Permutation:
    """Highest score is eliminated first; ties go to the smaller node id."""
    f = np.asarray(f, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise ValueError("scores must be finite")
    # lexsort: last key is primary
    return Permutation(np.lexsort((np.arange(f.size), -f)))


def write_permutation(perm: Permutation, stream: TextIO | None = None) -> str:
    text = "".join(f"{k}\n" for k in perm.new_to_old.tolist())
    if stream is not None:
        stream.write(text)
    return text


def read_permutation(stream: TextIO | str) -> Permutation:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    vals = []
    for lineno, line in enumerate(stream, 1):
        s = line.strip()
        if not s:
            continue
        try:
            vals.append(int(s))
        except ValueError:
            raise ValueError(f"line {lineno}: not an integer: {s!r}") from None
    return Permutation(np.asarray(vals, dtype=np.int64))

