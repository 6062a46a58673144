"""Timing grid over (N, D) for the exhaustive and kd-tree searches.

Each cell draws N reference and N query points uniformly from the unit
hypercube, runs every method, checks that all methods return the same
neighbor table, and records the median wall time and the number of
point-to-point distance evaluations.
"""

from __future__ import annotations

import json
import logging
import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bruteforce import BfConfig, bf_knn
from .core import KnnError, Metric, NeighborTable, PointSet
from .csvio import format_rows
from .kdtree import DEFAULT_LEAF_SIZE, build_kdtree, kdtree_knn

log = logging.getLogger(__name__)

CSV_HEADER = ("method", "n", "d", "k", "seconds", "dist_evals", "seed")
METHODS = ("BF", "KDT")
TABLE1_N = (1200, 2400, 4800, 9600, 19200, 38400)
TABLE1_D = (8, 16, 32, 64, 80, 96)
DESK_MAX_N = 4800

GRIDS = {
    "smoke": ((100, 200), (8, 16, 32)),
    "default": ((1200, 2400, 4800), TABLE1_D),
    "table1": (TABLE1_N, TABLE1_D),
}


class CrossCheckError(KnnError):
    """Methods disagreed on a grid cell; no timing is reported for it."""


def generate_uniform(n: int, d: int, seed: int) -> PointSet:
    """n x d points, i.i.d. uniform on [0, 1), from PCG64 seeded with ``seed``."""
    if n < 1 or d < 1:
        raise KnnError(f"n and d must be >= 1, got n={n}, d={d}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return PointSet(rng.random((n, d)))


def cell_seed(master: int, n: int, d: int) -> int:
    """64-bit seed for one (n, d) cell, derived from the master seed."""
    ss = np.random.SeedSequence([master, n, d])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def cell_data(seed: int, n: int, d: int) -> tuple[PointSet, PointSet]:
    reference = generate_uniform(n, d, seed)
    query = generate_uniform(n, d, (seed + 1) % 2**64)
    return reference, query


@dataclass
class BenchmarkConfig:
    n_values: Sequence[int] = GRIDS["default"][0]
    d_values: Sequence[int] = TABLE1_D
    k: int = 20
    methods: Sequence[str] = METHODS
    metric: Metric = field(default_factory=Metric.euclidean)
    seed: int = 0
    repetitions: int = 3
    worker_count: int = 0
    leaf_size: int = DEFAULT_LEAF_SIZE
    time_budget: Optional[float] = None  # seconds per single run of one method
    allow_large: bool = False

    def __post_init__(self):
        self.n_values = tuple(int(v) for v in self.n_values)
        self.d_values = tuple(int(v) for v in self.d_values)
        self.methods = tuple(m.upper() for m in self.methods)
        if not self.n_values or not self.d_values or not self.methods:
            raise KnnError("n_values, d_values and methods must be non-empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise KnnError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.repetitions < 1:
            raise KnnError("repetitions must be >= 1")
        if self.k < 1 or self.k > min(self.n_values):
            raise KnnError(f"k={self.k} must lie in [1, min(n_values)={min(self.n_values)}]")
        if min(self.d_values) < 1:
            raise KnnError("dimensions must be >= 1")
        if max(self.n_values) > DESK_MAX_N and not self.allow_large:
            raise KnnError(
                f"n up to {max(self.n_values)} exceeds the desk-scale limit {DESK_MAX_N}; "
                "pass allow_large to run it"
            )


@dataclass
class BenchmarkRow:
    method: str
    n: int
    d: int
    k: int
    seconds: Optional[float]
    dist_evals: Optional[int]
    seed: int

    @property
    def skipped(self) -> bool:
        return self.seconds is None

    def csv_fields(self) -> tuple:
        if self.skipped:
            return (self.method, self.n, self.d, self.k, "skipped", "", self.seed)
        return (self.method, self.n, self.d, self.k, self.seconds, self.dist_evals, self.seed)


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow]
    environment: str = ""
    metadata: dict = field(default_factory=dict)

    def select(self, method: str, n: int) -> list[BenchmarkRow]:
        return [r for r in self.rows if r.method == method.upper() and r.n == n and not r.skipped]

    def to_csv(self) -> str:
        return format_rows((r.csv_fields() for r in self.rows), CSV_HEADER)

    def to_json(self) -> str:
        doc = {
            "environment": self.environment,
            "metadata": self.metadata,
            "rows": [asdict(r) for r in self.rows],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkReport":
        doc = json.loads(text)
        return cls(
            rows=[BenchmarkRow(**r) for r in doc["rows"]],
            environment=doc.get("environment", ""),
            metadata=doc.get("metadata", {}),
        )


def describe_host() -> str:
    return (
        f"{platform.system()} {platform.machine()}; python {platform.python_version()}; "
        f"numpy {np.__version__}; cpus={os.cpu_count()}"
    )


def _median_time(durations: list[float]) -> float:
    if len(durations) >= 4:
        durations = durations[1:]  # warm-up
    return statistics.median(durations)


def _time_method(method, reference, query, config, bf_config):
    """Run one method ``repetitions`` times: (median seconds, table) or None if over budget."""
    durations = []
    table = None
    for _ in range(config.repetitions):
        t0 = time.perf_counter()
        if method == "BF":
            table = bf_knn(query, reference, config.k, config.metric, bf_config)
        else:
            tree = build_kdtree(reference, config.leaf_size)
            table = kdtree_knn(tree, query, config.k, config.metric)
        elapsed = time.perf_counter() - t0
        durations.append(elapsed)
        if config.time_budget is not None and elapsed > config.time_budget:
            return None, table
    return _median_time(durations), table


def run_grid(config: BenchmarkConfig) -> BenchmarkReport:
    """Time every method on every (n, d) cell, after cross-checking outputs."""
    bf_config = BfConfig(worker_count=config.worker_count)
    rows: list[BenchmarkRow] = []
    for n in config.n_values:
        for d in config.d_values:
            seed = cell_seed(config.seed, n, d)
            reference, query = cell_data(seed, n, d)
            results: dict[str, tuple[Optional[float], NeighborTable]] = {}
            for method in config.methods:
                results[method] = _time_method(method, reference, query, config, bf_config)

            completed = [m for m in config.methods if results[m][0] is not None]
            if len(completed) > 1:
                ref_table = results[completed[0]][1]
                for m in completed[1:]:
                    if not results[m][1].same_neighbors(ref_table):
                        raise CrossCheckError(
                            f"{m} disagrees with {completed[0]} at n={n}, d={d}"
                        )
            for method in config.methods:
                seconds, table = results[method]
                if seconds is None:
                    log.warning("%s n=%d d=%d over time budget; skipped", method, n, d)
                    rows.append(BenchmarkRow(method, n, d, config.k, None, None, seed))
                    continue
                # sub-resolution timings still count as positive
                seconds = max(seconds, 1e-9)
                rows.append(BenchmarkRow(method, n, d, config.k, seconds, table.dist_evals, seed))
                log.info("%s n=%d d=%d %.4fs evals=%d", method, n, d, seconds, table.dist_evals)
    metadata = {
        "metric": str(config.metric),
        "distribution": "uniform[0,1)^d, PCG64",
        "repetitions": config.repetitions,
        "statistic": "median" + (", first run discarded" if config.repetitions >= 4 else ""),
        "worker_count": bf_config.workers(),
        "leaf_size": config.leaf_size,
        "master_seed": config.seed,
    }
    return BenchmarkReport(rows, describe_host(), metadata)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float


def fit_line(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Ordinary least squares y = slope * x + intercept."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] < 3 or np.unique(x).shape[0] < 3:
        raise KnnError(f"need at least 3 distinct x values for a slope fit, got {np.unique(x).shape[0]}")
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(yc @ yc)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return SlopeFit(slope, intercept, r2)


def fit_dimension_slope(report: BenchmarkReport, n: int, method: str) -> SlopeFit:
    """Least-squares fit of wall time against dimension for one (method, n)."""
    rows = report.select(method, n)
    if len({r.d for r in rows}) < 3:
        raise KnnError(f"need >= 3 timed dimensions for {method} at n={n}, have {len(rows)}")
    return fit_line([r.d for r in rows], [r.seconds for r in rows])
