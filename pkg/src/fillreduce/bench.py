"""Benchmark harness: order matrices with several methods and report fill."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .oracle import a_nnz_full_diagonal, elimination_fill
from .orderings import (
    METHODS,
    fiedler_order,
    min_degree_order,
    natural_order,
    rcm_order,
    spectral_nd_order,
)
from .pipeline import OptimizerConfig, udno_order
from .sparse import Graph, Permutation, SparsePattern, pattern_to_graph, read_matrix_market, symmetrize_pattern
from .synth import GenSpec, generate

__all__ = [
    "BenchRow",
    "BenchConfig",
    "order_graph",
    "run_benchmark",
    "emit_report",
    "parse_report_csv",
    "strip_timing",
    "emit_spy_svg",
    "TIMING_COLUMNS",
]

TIMING_COLUMNS = ("order_time_ms", "eval_time_ms")
SPY_MAX = 2048


@dataclass
class BenchRow:
    matrix: str
    n: int
    a_nnz: int
    method: str
    fill_edges: int
    nnz_ratio: float
    sigma1: int
    bandwidth: int
    order_time_ms: float
    eval_time_ms: float
    seed: int
    error: str = ""


COLUMNS = tuple(f.name for f in fields(BenchRow))
_INT_COLS = {"n", "a_nnz", "fill_edges", "sigma1", "bandwidth", "seed"}
_FLOAT_COLS = {"nnz_ratio", "order_time_ms", "eval_time_ms"}


@dataclass(frozen=True)
class BenchConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    leaf_size: int = 8
    lap: str = "unnorm"
    jobs: int = 1


def order_graph(g: Graph, method: str, config: BenchConfig = BenchConfig()) -> Permutation:
    if method == "natural":
        return natural_order(g.n)
    if method == "rcm":
        return rcm_order(g)
    if method == "mindeg":
        return min_degree_order(g)
    if method == "fiedler":
        return fiedler_order(g, config.lap)
    if method == "snd":
        return spectral_nd_order(g, config.leaf_size, config.lap)
    if method == "udno":
        return udno_order(g, config.optimizer)[0]
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _error_row(name: str, method: str, seed: int, exc: BaseException, n: int = 0, a_nnz: int = 0) -> BenchRow:
    msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return BenchRow(name, n, a_nnz, method, 0, math.nan, 0, 0, 0.0, 0.0, seed, msg)


def _run_one(name: str, g: Graph, method: str, config: BenchConfig) -> BenchRow:
    seed = config.optimizer.seed
    a_nnz = a_nnz_full_diagonal(g)
    try:
        t0 = time.perf_counter()
        perm = order_graph(g, method, config)
        t1 = time.perf_counter()
        if perm.n != g.n:
            raise ValueError("ordering has the wrong size")
        rep = elimination_fill(g, perm)
        t2 = time.perf_counter()
    except Exception as exc:  # recorded in the row; the batch keeps going
        return _error_row(name, method, seed, exc, g.n, a_nnz)
    return BenchRow(
        matrix=name,
        n=g.n,
        a_nnz=a_nnz,
        method=method,
        fill_edges=rep.fill_edges,
        nnz_ratio=rep.nnz_ratio,
        sigma1=rep.sigma1,
        bandwidth=rep.bandwidth,
        order_time_ms=(t1 - t0) * 1e3,
        eval_time_ms=(t2 - t1) * 1e3,
        seed=seed,
    )


def _run_task(task) -> BenchRow:
    name, g, method, config = task
    return _run_one(name, g, method, config)


def _expand(inputs) -> list:
    out = []
    for item in inputs:
        if isinstance(item, (str, Path)) and Path(item).is_dir():
            out.extend(sorted(Path(item).glob("*.mtx")))
        else:
            out.append(item)
    return out


def _load(item) -> tuple[str, SparsePattern]:
    if isinstance(item, GenSpec):
        return item.name, generate(item)
    if isinstance(item, tuple):
        name, p = item
        return str(name), p
    path = Path(item)
    return path.stem, read_matrix_market(path)


def run_benchmark(
    inputs: Iterable, methods: Sequence[str] = METHODS, config: BenchConfig = BenchConfig()
) -> list[BenchRow]:
    """Evaluate every (matrix, method) pair.

    ``inputs`` may mix Matrix Market paths, directories of ``.mtx`` files,
    :class:`GenSpec` objects and ``(name, SparsePattern)`` pairs. A matrix
    that fails to load yields a single error row; ordering failures yield
    an error row for that method only. Rows are sorted by matrix then method.
    """
    items = _expand(inputs)
    if not items:
        raise ValueError("no benchmark inputs")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    rows: list[BenchRow] = []
    tasks = []
    for item in items:
        label = item.name if isinstance(item, GenSpec) else str(item[0] if isinstance(item, tuple) else Path(item).stem)
        try:
            name, p = _load(item)
            g = pattern_to_graph(symmetrize_pattern(p))
        except Exception as exc:
            rows.append(_error_row(label, "-", config.optimizer.seed, exc))
            continue
        tasks.extend((name, g, m, config) for m in methods)
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows.extend(pool.map(_run_task, tasks))
    else:
        rows.extend(_run_task(t) for t in tasks)
    rows.sort(key=lambda r: (r.matrix, r.method))
    return rows


def _summaries(rows: Sequence[BenchRow]) -> list[dict]:
    out = []
    ok = [r for r in rows if not r.error]
    numeric = [c for c in COLUMNS if c in _INT_COLS | _FLOAT_COLS and c != "seed"]
    for method in sorted({r.method for r in ok}):
        group = [asdict(r) for r in ok if r.method == method]
        mean = {c: "" for c in COLUMNS}
        dev = {c: "" for c in COLUMNS}
        mean.update(matrix="__mean__", method=method)
        dev.update(matrix="__dev__", method=method)
        for c in numeric:
            vals = np.array([row[c] for row in group], dtype=np.float64)
            mean[c] = float(vals.mean())
            dev[c] = float(vals.std())
        out.extend([mean, dev])
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(rows: Sequence[BenchRow], fmt: str = "csv") -> str:
    """CSV or JSON report with per-method mean and deviation records appended."""
    records = [asdict(r) for r in rows] + _summaries(rows)
    if fmt == "json":
        clean = [
            {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}
            for rec in records
        ]
        return json.dumps(clean, indent=1) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow([_fmt(rec[c]) for c in COLUMNS])
    return buf.getvalue()


def parse_report_csv(text: str) -> list[dict]:
    """Read back a CSV report with numeric columns converted."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row: dict = {}
        for k, v in rec.items():
            if v == "" or k not in _INT_COLS | _FLOAT_COLS:
                row[k] = v
            elif k in _INT_COLS and rec["matrix"] not in ("__mean__", "__dev__"):
                row[k] = int(v)
            else:
                row[k] = float(v)
        out.append(row)
    return out


def strip_timing(report: str, fmt: str = "csv") -> str:
    """Report text with the timing columns removed (for determinism checks)."""
    if fmt == "json":
        recs = json.loads(report)
        for rec in recs:
            for c in TIMING_COLUMNS:
                rec.pop(c, None)
        return json.dumps(recs, indent=1)
    rows = list(csv.reader(io.StringIO(report)))
    if not rows:
        return ""
    keep = [i for i, c in enumerate(rows[0]) if c not in TIMING_COLUMNS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([r[i] for i in keep])
    return buf.getvalue()


def emit_spy_svg(p: SparsePattern, path, max_cells: int = SPY_MAX) -> int:
    """Write an SVG sparsity plot; returns the number of marks drawn.

    Matrices larger than ``max_cells`` are bucketed so that at most
    ``max_cells`` marks appear along each axis.
    """
    bucket = max(1, math.ceil(p.n / max_cells))
    cells = math.ceil(p.n / bucket) if p.n else 0
    r = p.row_ids() // bucket
    c = p.col_ids // bucket
    keys = np.unique(r * max(cells, 1) + c) if r.size else np.empty(0, dtype=np.int64)
    rr, cc = keys // max(cells, 1), keys % max(cells, 1)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {max(cells, 1)} {max(cells, 1)}" '
        f'width="{min(800, 8 * max(cells, 1))}" height="{min(800, 8 * max(cells, 1))}">',
        f'<rect x="0" y="0" width="{max(cells, 1)}" height="{max(cells, 1)}" fill="white"/>',
        '<g fill="black">',
    ]
    lines.extend(f'<rect x="{x}" y="{y}" width="1" height="1"/>' for y, x in zip(rr.tolist(), cc.tolist()))
    lines += ["</g>", "</svg>"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return int(keys.size)
