"""Command-line entry point: dataset generation, benchmarks, and the HTTP service.

Benchmarks run in-process (timing through a network hop would measure the
hop).  ``serve`` starts the HTTP service and ``client`` is a thin client for it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .bench import (
    IMPLS,
    VALIDATE_CAP,
    BenchConfig,
    cmd_build,
    cmd_delete,
    cmd_insert,
    cmd_knn,
    cmd_mixed,
    emit_csv,
)
from .datagen_io import DatasetKind, DatasetSpec, read_points, write_points

log = logging.getLogger("bdltree")


def parse_int_list(text: str) -> list[int]:
    """``"5"`` -> [5], ``"1,5,11"`` -> [1, 5, 11], ``"2-11"`` -> [2, ..., 11]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parse_impls(text: str) -> list[str]:
    impls = list(IMPLS) if text == "all" else [x.strip() for x in text.split(",")]
    for impl in impls:
        if impl not in IMPLS:
            raise argparse.ArgumentTypeError(f"unknown implementation {impl!r}")
    return impls


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("dataset")
    g.add_argument("--input", help="point file (binary or text); overrides the generator flags")
    g.add_argument("--kind", choices=[k.value for k in DatasetKind if k is not DatasetKind.FILE],
                   default="uniform")
    g.add_argument("--n", type=int, default=10_000)
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--step", type=float, default=None, help="visualvar step (default domain/1000)")
    g.add_argument("--p-jump", type=float, default=0.01, help="visualvar teleport probability")
    g.add_argument("--domain", type=float, default=None, help="visualvar cube side (default sqrt(n))")


def _dataset(args) -> DatasetSpec:
    if getattr(args, "input", None):
        return DatasetSpec(DatasetKind.FILE, path=args.input, seed=args.seed)
    return DatasetSpec(args.kind, args.n, args.d, args.seed, args.step, args.p_jump, args.domain)


def _add_bench_args(p: argparse.ArgumentParser) -> None:
    _add_dataset_args(p)
    p.add_argument("--impl", type=parse_impls, default=["bdl"], help="bdl, b1, b2, a comma list, or all")
    p.add_argument("--split", choices=["object", "spatial"], default="object")
    p.add_argument("--threads", type=parse_int_list, default=[1], help="thread count(s), e.g. 1,4 or 1-8")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--buffer-size", type=int, default=1024, help="BDL buffer capacity X")
    p.add_argument("--validate", action="store_true", help="check answers against brute force")
    p.add_argument("--validate-cap", type=int, default=VALIDATE_CAP)
    p.add_argument("--out", help="CSV output path (default stdout)")


def _add_batch_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--batch-pct", type=parse_float_list, default=None, help="batch size(s) as percent of n")
    g.add_argument("--batch-size", type=parse_int_list, default=None, help="batch size(s) in points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdltree", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset file")
    _add_dataset_args(p)
    p.add_argument("--format", choices=["binary", "text"], default="binary")
    p.add_argument("--out", required=True)

    p = sub.add_parser("build", help="time construction")
    _add_bench_args(p)

    p = sub.add_parser("insert", help="time batch insertion from empty")
    _add_bench_args(p)
    _add_batch_args(p)

    p = sub.add_parser("delete", help="time batch deletion from a full structure")
    _add_bench_args(p)
    _add_batch_args(p)
    p.add_argument("--total-pct", type=float, default=100.0, help="share of the dataset to delete")

    p = sub.add_parser("knn", help="time k-NN queries")
    _add_bench_args(p)
    p.add_argument("--k", type=parse_int_list, default=[5], help="k value(s), e.g. 5 or 2-11")
    p.add_argument("--query-pct", type=float, default=10.0)

    p = sub.add_parser("mixed", help="time the interleaved insert/delete/k-NN workload")
    _add_bench_args(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--query-pct", type=float, default=10.0)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("client", help="talk to a running service")
    p.add_argument("--url", default="http://127.0.0.1:8000")
    csub = p.add_subparsers(dest="action", required=True)
    c = csub.add_parser("create")
    c.add_argument("name")
    c.add_argument("--dim", type=int, required=True)
    c.add_argument("--impl", choices=IMPLS, default="bdl")
    c.add_argument("--split", choices=["object", "spatial"], default="object")
    c.add_argument("--buffer-size", type=int, default=1024)
    csub.add_parser("list")
    for action in ("info", "drop"):
        csub.add_parser(action).add_argument("name")
    for action in ("insert", "erase"):
        c = csub.add_parser(action)
        c.add_argument("name")
        c.add_argument("--input", required=True, help="point file")
    c = csub.add_parser("knn")
    c.add_argument("name")
    c.add_argument("--input", required=True, help="query point file")
    c.add_argument("--k", type=int, default=5)
    return parser


def _run_bench(args) -> int:
    spec = _dataset(args)
    points = spec.load()
    log.info("loaded %s: %d points in %d-D", spec.describe(), points.shape[0], points.shape[1])
    results = []
    for impl in args.impl:
        for threads in args.threads:
            cfg = BenchConfig(impl=impl, heuristic=args.split, threads=threads, seed=args.seed, runs=args.runs,
                              warmup=args.warmup, buffer_size=args.buffer_size, validate=args.validate,
                              validate_cap=args.validate_cap, dataset=spec.describe())
            if args.command == "build":
                results.append(cmd_build(points, cfg))
            elif args.command in ("insert", "delete"):
                sizes = [("pct", p) for p in args.batch_pct or []] + [("size", s) for s in args.batch_size or []]
                for kind, value in sizes or [("pct", 10.0)]:
                    kw = {"batch_pct": value} if kind == "pct" else {"batch_size": value}
                    if args.command == "insert":
                        results.append(cmd_insert(points, cfg, **kw))
                    else:
                        results.append(cmd_delete(points, cfg, total_pct=args.total_pct, **kw))
            elif args.command == "knn":
                results.extend(cmd_knn(points, cfg, args.k, args.query_pct))
            else:
                results.extend(cmd_mixed(points, cfg, args.k, args.query_pct))
            log.info("%s threads=%d done", impl, threads)
    text = emit_csv(results, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def _run_client(args) -> int:
    import httpx

    with httpx.Client(base_url=args.url, timeout=None) as http:
        if args.action == "create":
            r = http.post("/indexes", json={"name": args.name, "dim": args.dim, "impl": args.impl,
                                            "split": args.split, "buffer_size": args.buffer_size})
        elif args.action == "list":
            r = http.get("/indexes")
        elif args.action == "info":
            r = http.get(f"/indexes/{args.name}")
        elif args.action == "drop":
            r = http.delete(f"/indexes/{args.name}")
        elif args.action == "knn":
            r = http.post(f"/indexes/{args.name}/knn",
                          json={"queries": read_points(args.input).tolist(), "k": args.k})
        else:
            r = http.post(f"/indexes/{args.name}/{args.action}", json={"points": read_points(args.input).tolist()})
    if r.status_code >= 400:
        sys.stderr.write(f"error {r.status_code}: {r.text}\n")
        return 1
    if r.content:
        json.dump(r.json(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if args.command == "gen":
        points = _dataset(args).load()
        write_points(args.out, points, args.format)
        log.info("wrote %d points to %s", points.shape[0], args.out)
        return 0
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    if args.command == "client":
        return _run_client(args)
    try:
        return _run_bench(args)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
