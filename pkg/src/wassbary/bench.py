"""Monte Carlo harness: iteration counts on Wishart problems and log-decrease series.

Replicate ``r`` of cell ``(d, k)`` draws its ``k`` covariances from
``RngState.derive(seed, d, k, r)``, so results do not depend on execution
order or on the number of worker processes. Both variants of a replicate
see the same covariances.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import MathError, MaxIterExceeded, TooShort
from .fixpoint import IterationConfig, Variant, solve
from .gausswass import BarycenterProblem
from .symmat import RngState, sample_wishart

BENCH_HEADER = ("d", "k", "variant", "mean_iter", "stdev_iter", "failures", "replicates")
LOGDECAY_HEADER = ("n", "log10_delta_v")


@dataclass(frozen=True)
class BenchConfig:
    dims: Sequence[int] = (2, 3, 5, 10)
    ks: Sequence[int] = (2, 3, 5)
    replicates: int = 200
    seed: int = 0
    tol: float = 1e-10
    variants: Sequence[str] = ("paper", "ru")
    max_iter: int = 5000
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.dims or not self.ks:
            raise ValueError("dims and ks must be non-empty")
        if any(d < 1 for d in self.dims) or any(k < 1 for k in self.ks):
            raise ValueError("dims and ks must be positive")
        object.__setattr__(self, "variants", tuple(Variant(v) for v in self.variants))


@dataclass(frozen=True)
class ReplicateRecord:
    d: int
    k: int
    replicate: int
    variant: Variant
    n_iter: int
    converged: bool
    bound_violations: int


@dataclass(frozen=True)
class BenchCell:
    d: int
    k: int
    variant: str
    mean_iter: float
    stdev_iter: float
    failures: int
    replicates: int

    @property
    def stderr_iter(self) -> float:
        ok = self.replicates - self.failures
        return self.stdev_iter / math.sqrt(ok) if ok > 0 else math.nan


def wishart_problem(seed: int, d: int, k: int, replicate: int) -> BarycenterProblem:
    """Equal-weight problem of ``k`` independent ``W_d(Id, d)`` covariances."""
    rng = RngState.derive(seed, d, k, replicate)
    return BarycenterProblem.from_covariances([sample_wishart(rng, d) for _ in range(k)])


def _run_task(task) -> list[ReplicateRecord]:
    seed, d, k, r, variants, tol, max_iter = task
    problem = wishart_problem(seed, d, k, r)
    out = []
    for variant in variants:
        config = IterationConfig(tol=tol, max_iter=max_iter, variant=variant)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MaxIterExceeded)
                result, _ = solve(problem, config)
        except MathError:
            out.append(ReplicateRecord(d, k, r, variant, 0, False, 0))
            continue
        out.append(
            ReplicateRecord(
                d, k, r, variant, result.n_iter, result.converged, len(result.bound_report.violations)
            )
        )
    return out


def run_replicates(config: BenchConfig) -> list[ReplicateRecord]:
    """Solve every replicate; records come back sorted by ``(d, k, variant, replicate)``."""
    tasks = [
        (config.seed, d, k, r, config.variants, config.tol, config.max_iter)
        for d in config.dims
        for k in config.ks
        for r in range(config.replicates)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            batches = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        batches = [_run_task(t) for t in tasks]
    order = {v: i for i, v in enumerate(config.variants)}
    records = [rec for batch in batches for rec in batch]
    records.sort(key=lambda r: (config.dims.index(r.d), config.ks.index(r.k), order[r.variant], r.replicate))
    return records


def aggregate(records: Iterable[ReplicateRecord], config: BenchConfig) -> list[BenchCell]:
    cells = []
    grouped: dict[tuple, list[ReplicateRecord]] = {}
    for rec in records:
        grouped.setdefault((rec.d, rec.k, rec.variant), []).append(rec)
    for d in config.dims:
        for k in config.ks:
            for variant in config.variants:
                recs = sorted(grouped.get((d, k, variant), []), key=lambda r: r.replicate)
                iters = [float(r.n_iter) for r in recs if r.converged]
                failures = len(recs) - len(iters)
                mean = statistics.fmean(iters) if iters else math.nan
                stdev = statistics.stdev(iters) if len(iters) > 1 else 0.0
                cells.append(BenchCell(d, k, variant.value, mean, stdev, failures, len(recs)))
    return cells


def run_wishart_benchmark(config: BenchConfig) -> list[BenchCell]:
    """Average iteration counts per ``(d, k, variant)`` over seeded Wishart replicates.

    Non-converged replicates are counted in ``failures`` and left out of
    the mean.
    """
    return aggregate(run_replicates(config), config)


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def write_bench_csv(cells: Sequence[BenchCell], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    for c in cells:
        writer.writerow(
            [c.d, c.k, c.variant, fmt_float(c.mean_iter), fmt_float(c.stdev_iter), c.failures, c.replicates]
        )


def bench_csv_text(cells: Sequence[BenchCell]) -> str:
    buf = io.StringIO()
    write_bench_csv(cells, buf)
    return buf.getvalue()


# --------------------------------------------------------------------------
# Rate of convergence


def log_decrease_series(
    problem: BarycenterProblem, config: IterationConfig | None = None
) -> list[tuple[int, float]]:
    """``(n, log10(V(S_n) - V(S_{n+1})))`` for ``n = 0 .. n_iter - 1``.

    Trailing entries whose decrease is not positive (rounding noise at
    convergence) are dropped; an immediately converged problem gives an
    empty series.
    """
    config = config or IterationConfig()
    if config.variant is not Variant.PAPER:
        raise ValueError("log-decrease series needs variant='paper'")
    result, trace = solve(problem, config)
    v = trace.column("v")[: result.n_iter + 1]
    decrease = v[:-1] - v[1:]
    end = len(decrease)
    while end > 0 and not decrease[end - 1] > 0:
        end -= 1
    return [(n, float(np.log10(decrease[n]))) for n in range(end) if decrease[n] > 0]


def middle_fraction(series: Sequence, fraction: float = 0.8) -> list:
    """Central ``fraction`` of ``series``, trimming equally from both ends."""
    series = list(series)
    cut = int(round(len(series) * (1.0 - fraction) / 2.0))
    return series[cut : len(series) - cut]


def fit_linear(series: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Ordinary least squares ``y = slope * n + intercept``; returns ``(slope, intercept, r2)``.

    ``r2`` is 1 when ``y`` has no variance (a constant series is fit exactly).
    """
    if len(series) < 3:
        raise TooShort(f"need at least 3 points, got {len(series)}")
    x = np.array([p[0] for p in series], dtype=np.float64)
    y = np.array([p[1] for p in series], dtype=np.float64)
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def write_logdecay_csv(series: Sequence[tuple[int, float]], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(LOGDECAY_HEADER)
    for n, y in series:
        writer.writerow([n, fmt_float(y)])
