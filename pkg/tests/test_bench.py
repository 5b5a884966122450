import json
import math
from dataclasses import replace

import numpy as np
import pytest

from fillreduce.bench import (
    COLUMNS,
    TIMING_COLUMNS,
    BenchConfig,
    emit_report,
    emit_spy_svg,
    parse_report_csv,
    run_benchmark,
    strip_timing,
)
from fillreduce.oracle import nnz_ratio
from fillreduce.pipeline import OptimizerConfig
from fillreduce.sparse import SparsePattern, apply_permutation, graph_to_pattern, write_matrix_market
from fillreduce.synth import GenSpec, generate, random_permute

from graphs import path

FAST = BenchConfig(optimizer=OptimizerConfig(steps=30))
SPECS = [GenSpec("grid2d-5pt", k=5), GenSpec("grid2d-9pt", k=4), GenSpec("random-geometric", n=60, radius=0.25, seed=2)]


@pytest.fixture(scope="module")
def rows():
    return run_benchmark(SPECS, ["natural", "rcm", "mindeg", "udno"], FAST)


def test_cartesian_count(rows):
    assert len(rows) == 12
    assert not any(r.error for r in rows)
    keys = [(r.matrix, r.method) for r in rows]
    assert keys == sorted(keys)


def test_ratio_recomputes(rows):
    for r in rows:
        assert r.nnz_ratio == nnz_ratio(r.fill_edges, r.a_nnz)
        assert r.order_time_ms >= 0 and r.eval_time_ms >= 0


def test_tridiagonal_natural():
    (r,) = run_benchmark([("tri", graph_to_pattern(path(30)))], ["natural"])
    assert r.nnz_ratio == 0.0 and r.fill_edges == 0


def test_deterministic(rows):
    again = run_benchmark(SPECS, ["natural", "rcm", "mindeg", "udno"], FAST)
    assert strip_timing(emit_report(rows)) == strip_timing(emit_report(again))


def test_parallel_matches_serial(rows):
    par = run_benchmark(SPECS, ["natural", "rcm", "mindeg", "udno"], replace(FAST, jobs=2))
    assert strip_timing(emit_report(rows)) == strip_timing(emit_report(par))


def test_errors():
    with pytest.raises(ValueError):
        run_benchmark([])
    with pytest.raises(ValueError):
        run_benchmark(SPECS[:1], ["amd"])


def test_corrupt_file_isolated(tmp_path):
    for i, k in enumerate((4, 6)):
        (tmp_path / f"good{i}.mtx").write_text(write_matrix_market(generate(GenSpec("grid2d-5pt", k=k))))
    (tmp_path / "bad.mtx").write_text("%%MatrixMarket matrix coordinate real general\n3 3 2\n1 1\n")
    rows = run_benchmark([tmp_path], ["natural", "rcm"])
    assert len(rows) == 5
    bad = [r for r in rows if r.error]
    assert len(bad) == 1 and bad[0].matrix == "bad" and math.isnan(bad[0].nnz_ratio)
    assert {r.matrix for r in rows if not r.error} == {"good0", "good1"}


class TestReport:
    def test_empty_header_only(self):
        assert emit_report([]) == ",".join(COLUMNS) + "\n"
        assert json.loads(emit_report([], "json")) == []

    def test_single_row_summary(self):
        (r,) = run_benchmark(SPECS[:1], ["rcm"])
        recs = parse_report_csv(emit_report([r]))
        mean = next(x for x in recs if x["matrix"] == "__mean__")
        dev = next(x for x in recs if x["matrix"] == "__dev__")
        assert mean["fill_edges"] == r.fill_edges and mean["nnz_ratio"] == r.nnz_ratio
        assert dev["fill_edges"] == 0.0 and dev["nnz_ratio"] == 0.0

    def test_summary_statistics(self, rows):
        recs = parse_report_csv(emit_report(rows))
        for method in ("natural", "udno"):
            fills = np.array([r.fill_edges for r in rows if r.method == method], dtype=float)
            mean = next(x for x in recs if x["matrix"] == "__mean__" and x["method"] == method)
            dev = next(x for x in recs if x["matrix"] == "__dev__" and x["method"] == method)
            assert mean["fill_edges"] == fills.mean() and dev["fill_edges"] == fills.std()

    def test_csv_round_trip(self, rows):
        recs = parse_report_csv(emit_report(rows))[: len(rows)]
        for rec, r in zip(recs, rows):
            for c in COLUMNS:
                assert rec[c] == getattr(r, c)

    def test_csv_json_agree(self, rows):
        csv_recs = parse_report_csv(emit_report(rows))
        json_recs = json.loads(emit_report(rows, "json"))
        assert len(csv_recs) == len(json_recs)
        for a, b in zip(csv_recs, json_recs):
            assert list(b) == list(COLUMNS)
            assert a == b

    def test_strip_timing(self, rows):
        head = strip_timing(emit_report(rows)).splitlines()[0].split(",")
        assert not set(TIMING_COLUMNS) & set(head)
        recs = json.loads(strip_timing(emit_report(rows, "json"), "json"))
        assert all(not set(TIMING_COLUMNS) & set(r) for r in recs)

    def test_bad_format(self, rows):
        with pytest.raises(ValueError):
            emit_report(rows, "xml")


class TestSpy:
    def test_tridiagonal(self, tmp_path):
        out = tmp_path / "t.svg"
        assert emit_spy_svg(graph_to_pattern(path(3)), out) == 7
        assert out.read_text().count('width="1"') == 7

    def test_bucketing(self, tmp_path):
        n = 10_000
        p = SparsePattern.from_coo(n, np.arange(n), np.arange(n))
        marks = emit_spy_svg(p, tmp_path / "d.svg")
        assert marks <= 2048**2
        assert marks == math.ceil(n / math.ceil(n / 2048))

    def test_permuted_differs(self, tmp_path):
        p = generate(GenSpec("grid2d-5pt", k=10))
        q, _ = random_permute(p, 3)
        emit_spy_svg(p, tmp_path / "a.svg")
        emit_spy_svg(q, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() != (tmp_path / "b.svg").read_bytes()

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            emit_spy_svg(graph_to_pattern(path(3)), tmp_path / "missing" / "x.svg")
