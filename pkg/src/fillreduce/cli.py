"""Command-line entry point: ``fillreduce <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bench import BenchConfig, emit_report, emit_spy_svg, order_graph, run_benchmark
from .oracle import elimination_fill
from .orderings import METHODS
from .pipeline import OptimizerConfig
from .sparse import (
    apply_permutation,
    pattern_to_graph,
    read_matrix_market,
    read_permutation,
    symmetrize_pattern,
    write_matrix_market,
    write_permutation,
)
from .spectral import EmbedConfig, train_embedding
from .synth import FAMILIES, GenSpec, generate, random_permute, rgg_radius, standard_suite


def _optimizer_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ordering options")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lr", type=float, default=1e-4, help="score learning rate")
    g.add_argument("--steps", type=int, default=300, help="score optimization steps")
    g.add_argument("--sigma", type=float, default=1e-4, help="score noise standard deviation")
    g.add_argument("--init", choices=("fiedler", "random"), default="fiedler")
    g.add_argument("--stage1", choices=("eig", "direct", "mgnn"), default="eig")
    g.add_argument("--leaf-size", type=int, default=8)
    g.add_argument("--lap", choices=("unnorm", "norm"), default=None,
                   help="Laplacian for spectral methods (default: unnorm for fiedler/snd, norm for udno)")


def _bench_config(a: argparse.Namespace, jobs: int = 1) -> BenchConfig:
    opt = OptimizerConfig(
        learning_rate=a.lr,
        steps=a.steps,
        sigma=a.sigma,
        init=a.init,
        stage1=a.stage1,
        seed=a.seed,
        lap=a.lap or "norm",
    )
    return BenchConfig(optimizer=opt, leaf_size=a.leaf_size, lap=a.lap or "unnorm", jobs=jobs)


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen(a) -> int:
    radius = a.radius
    if radius is None:
        radius = rgg_radius(a.n) if a.family == "random-geometric" and a.n else 0.0
    spec = GenSpec(a.family, k=a.k or 0, n=a.n or 0, radius=radius, seed=a.seed)
    p = generate(spec)
    if a.scramble is not None:
        p, _ = random_permute(p, a.scramble)
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            write_matrix_market(p, fh)
    else:
        write_matrix_market(p, sys.stdout)
    return 0


def cmd_order(a) -> int:
    g = pattern_to_graph(symmetrize_pattern(read_matrix_market(a.matrix)))
    perm = order_graph(g, a.method, _bench_config(a))
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            write_permutation(perm, fh)
    else:
        write_permutation(perm, sys.stdout)
    return 0


def cmd_eval(a) -> int:
    g = pattern_to_graph(symmetrize_pattern(read_matrix_market(a.matrix)))
    if a.perm:
        with open(a.perm, encoding="utf-8") as fh:
            perm = read_permutation(fh)
    else:
        perm = order_graph(g, a.method, _bench_config(a))
    if perm.n != g.n:
        raise ValueError(f"permutation has {perm.n} entries for a matrix of order {g.n}")
    rep = asdict(elimination_fill(g, perm))
    if a.format == "json":
        _write_text(json.dumps(rep, indent=1) + "\n", a.out)
    else:
        _write_text("".join(f"{k}\t{v}\n" for k, v in rep.items()), a.out)
    return 0


def cmd_bench(a) -> int:
    inputs: list = list(a.inputs)
    inputs.extend(GenSpec.parse(s) for s in a.gen)
    if a.suite:
        inputs.extend(standard_suite())
    methods = a.method.split(",") if a.method else list(METHODS)
    rows = run_benchmark(inputs, methods, _bench_config(a, a.jobs))
    _write_text(emit_report(rows, a.format), a.out)
    bad = [r for r in rows if r.error]
    for r in bad:
        print(f"error: {r.matrix} [{r.method}]: {r.error}", file=sys.stderr)
    return 1 if bad else 0


def cmd_spectral(a) -> int:
    g = pattern_to_graph(symmetrize_pattern(read_matrix_market(a.matrix)))
    extra = {k: v for k, v in (("steps", a.steps), ("learning_rate", a.lr)) if v is not None}
    cfg = EmbedConfig(mode=a.mode, seed=a.seed, lap=a.lap or "norm", **extra)
    emb = train_embedding(g, cfg)
    lines = [f"# mode={a.mode} lap={cfg.lap} lambdas={' '.join(repr(float(x)) for x in emb.lambdas)}"]
    lines.extend(" ".join(repr(float(x)) for x in row) for row in np.asarray(emb.F))
    _write_text("\n".join(lines) + "\n", a.out)
    return 0


def cmd_spy(a) -> int:
    p = read_matrix_market(a.matrix)
    if a.perm:
        with open(a.perm, encoding="utf-8") as fh:
            perm = read_permutation(fh)
        p = apply_permutation(symmetrize_pattern(p), perm)
    marks = emit_spy_svg(p, a.out)
    print(f"{marks} marks -> {a.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fillreduce", description="Fill-reducing orderings for sparse symmetric matrices.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic Matrix Market file")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scramble", type=int, metavar="SEED", help="apply a random symmetric permutation")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("order", help="compute a permutation for one matrix")
    p.add_argument("matrix")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--out")
    _optimizer_flags(p)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("eval", help="fill metrics for a matrix and permutation")
    p.add_argument("matrix")
    p.add_argument("perm", nargs="?", help="permutation file; omit to use --method")
    p.add_argument("--method", choices=METHODS, default="natural")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    _optimizer_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="benchmark methods over matrices")
    p.add_argument("inputs", nargs="*", help=".mtx files or directories")
    p.add_argument("--gen", action="append", default=[], metavar="SPEC",
                   help="synthetic input such as grid2d-5pt:k=10,seed=1 (repeatable)")
    p.add_argument("--suite", action="store_true", help="add the 50-instance synthetic suite")
    p.add_argument("--method", help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    _optimizer_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("spectral", help="dump a two-column spectral embedding")
    p.add_argument("matrix")
    p.add_argument("--stage1", "--mode", dest="mode", choices=("eig", "direct", "mgnn"), default="eig")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lap", choices=("unnorm", "norm"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("spy", help="SVG sparsity plot")
    p.add_argument("matrix")
    p.add_argument("--perm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spy)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # exits with status 2 on usage errors
    if args.command == "bench" and not (args.inputs or args.gen or args.suite):
        ap.error("bench needs at least one input file, --gen generator or --suite")
    if args.command == "bench" and args.method:
        bad = [m for m in args.method.split(",") if m not in METHODS]
        if bad:
            ap.error(f"unknown method(s): {', '.join(bad)}")
    try:
        return args.func(args)
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"fillreduce: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
