"""Command-line entry point: ``exactknn {search,bench,entropy,classify,retrieve}``.

Exit status: 0 success, 2 malformed input (CSV or flags), 3 contract
violation (k too large, dimension mismatch, ...).  Errors are a single
``error: <kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from . import __version__
from .applications import DescriptorDatabase, LabeledSet, knn_classify, retrieve_vote
from .bench import GRIDS, BenchmarkConfig, run_grid
from .bruteforce import BfConfig, bf_knn
from .core import KnnError, Metric, MetricKind
from .csvio import CsvFormatError, atomic_write, format_rows, parse_matrix, read_descriptors, read_labeled, read_points
from .entropy import kl_entropy
from .kdtree import DEFAULT_LEAF_SIZE, build_kdtree, kdtree_knn

EXIT_INPUT = 2
EXIT_CONTRACT = 3


def parse_metric(text: str) -> Metric:
    """``euclidean|manhattan|chebyshev|mahalanobis:PATH`` to a Metric."""
    name, _, path = text.partition(":")
    name = name.lower()
    if name == MetricKind.MAHALANOBIS.value:
        if not path:
            raise CsvFormatError("mahalanobis metric needs a matrix: mahalanobis:PATH")
        with open(path) as fh:
            return Metric.mahalanobis(parse_matrix(fh.read(), path))
    if path:
        raise KnnError(f"metric {name} takes no argument")
    try:
        return Metric(MetricKind(name))
    except ValueError:
        raise KnnError(f"unknown metric {text!r}") from None


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def cmd_search(args) -> None:
    R = read_points(args.ref)
    Q = read_points(args.query)
    metric = parse_metric(args.metric)
    if args.method == "kdtree":
        table = kdtree_knn(build_kdtree(R, args.leaf_size), Q, args.k, metric)
    else:
        table = bf_knn(Q, R, args.k, metric, BfConfig(worker_count=args.workers))
    rows = (
        (i, rank, int(table.indices[i, rank]), float(table.distances[i, rank]))
        for i in range(table.n)
        for rank in range(table.k)
    )
    _emit(format_rows(rows, ("query_index", "rank", "ref_index", "distance")), args.out)


def cmd_entropy(args) -> None:
    Y = read_points(args.input)
    est = kl_entropy(
        Y,
        args.k,
        args.variant,
        duplicates=args.duplicates,
        seed=args.seed,
        config=BfConfig(worker_count=args.workers),
    )
    _emit(json.dumps(est.as_dict()) + "\n", args.out)


def cmd_classify(args) -> None:
    points, labels = read_labeled(args.train)
    Q = read_points(args.query)
    predicted = knn_classify(
        LabeledSet(points, labels), Q, args.k, parse_metric(args.metric), BfConfig(worker_count=args.workers)
    )
    rows = ((i, int(lbl)) for i, lbl in enumerate(predicted))
    _emit(format_rows(rows, ("query_index", "label")), args.out)


def cmd_retrieve(args) -> None:
    descriptors, image_of = read_descriptors(args.db)
    Q = read_points(args.query)
    tally = retrieve_vote(
        DescriptorDatabase.from_ids(descriptors, image_of),
        Q,
        args.k,
        parse_metric(args.metric),
        BfConfig(worker_count=args.workers),
    )
    rows = ((rank, int(img), int(tally.scores[img])) for rank, img in enumerate(tally.ranking))
    _emit(format_rows(rows, ("rank", "image", "score")), args.out)


def cmd_bench(args) -> None:
    n_values, d_values = GRIDS[args.grid]
    if args.n_values:
        n_values = _int_list(args.n_values)
    if args.d_values:
        d_values = _int_list(args.d_values)
    config = BenchmarkConfig(
        n_values=n_values,
        d_values=d_values,
        k=args.k,
        methods=[m.strip() for m in args.methods.split(",")],
        metric=parse_metric(args.metric),
        seed=args.seed,
        repetitions=args.repetitions,
        worker_count=args.workers,
        leaf_size=args.leaf_size,
        time_budget=args.time_budget,
        allow_large=args.allow_large or args.grid == "table1",
    )
    report = run_grid(config)
    _emit(report.to_csv(), args.out)
    if args.json:
        atomic_write(args.json, report.to_json())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exactknn", description="Exact k-nearest-neighbor search tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, metric=True):
        p.add_argument("--k", type=int, required=True, help="number of neighbors")
        if metric:
            p.add_argument(
                "--metric",
                default="euclidean",
                help="euclidean | manhattan | chebyshev | mahalanobis:PATH (d x d CSV matrix)",
            )
        p.add_argument("--workers", type=int, default=0, help="worker threads, 0 = one per CPU")
        p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
        p.add_argument("--out", default=None, help="output file (default: stdout)")

    p = sub.add_parser("search", help="k nearest references for each query")
    p.add_argument("--ref", required=True, help="reference points CSV")
    p.add_argument("--query", required=True, help="query points CSV")
    p.add_argument("--method", choices=("bf", "kdtree"), default="bf")
    p.add_argument("--leaf-size", type=int, default=DEFAULT_LEAF_SIZE)
    common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("entropy", help="nearest-neighbor entropy estimate (nats)")
    p.add_argument("--in", dest="input", required=True, help="samples CSV")
    p.add_argument("--variant", choices=("corrected", "literal"), default="corrected")
    p.add_argument("--duplicates", choices=("error", "jitter"), default="error")
    common(p, metric=False)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("classify", help="kNN majority-vote labels")
    p.add_argument("--train", required=True, help="training CSV, last column an integer label")
    p.add_argument("--query", required=True, help="query points CSV")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("retrieve", help="rank database images by descriptor votes")
    p.add_argument("--db", required=True, help="database CSV, first column an integer image id")
    p.add_argument("--query", required=True, help="query descriptors CSV")
    common(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("bench", help="timing grid over (N, D)")
    p.add_argument("--grid", choices=sorted(GRIDS), default="default")
    p.add_argument("--n-values", help="comma-separated N values (overrides --grid)")
    p.add_argument("--d-values", help="comma-separated D values (overrides --grid)")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--methods", default="BF,KDT", help="comma-separated subset of BF,KDT")
    p.add_argument("--metric", default="euclidean")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--leaf-size", type=int, default=DEFAULT_LEAF_SIZE)
    p.add_argument("--time-budget", type=float, default=None, help="seconds per run before a cell is skipped")
    p.add_argument("--allow-large", action="store_true", help="permit N beyond the desk-scale limit")
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV report path (default: stdout)")
    p.add_argument("--json", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_bench)
    return parser


def _fail(kind: str, exc: BaseException, code: int) -> int:
    message = " ".join(str(exc).split())
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except CsvFormatError as exc:
        return _fail("input", exc, EXIT_INPUT)
    except OSError as exc:
        return _fail("io", exc, EXIT_INPUT)
    except KnnError as exc:
        return _fail("contract", exc, EXIT_CONTRACT)
    return 0


if __name__ == "__main__":
    sys.exit(main())
