"""Monte Carlo iteration-count grids and the bisection baseline.

A cell (A, alpha, epsilon) runs K independent projected iterations of the
stochastic process on the four-branch benchmark map, with x0 uniform on
[0,1], and reports the mean and population standard deviation of the
iteration counts over the runs that met the stopping rule.  Runs hitting
the cap are counted as failures and excluded from the mean, never folded
into it silently.

Streams are split deterministically: run k of a cell draws from
SeedSequence(base_seed, spawn_key=(k,)), so cells are reproducible
bit-exactly and runs may execute in any order (or in parallel) without
changing the result.  The full-grid driver gives the four epsilon cells
of each (A, alpha) pair the same base seed, so each run's first-passage
counts are monotone in epsilon by construction.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from statistics import fmean, pstdev
from typing import IO, Optional

import numpy as np
from numpy.random import Generator, PCG64, SeedSequence

from . import __version__
from .discrete import ITERATION_CAP, StoppingRule, run
from .maps import DomainError, ScalarMap, benchmark_map, residual
from .schedules import (RNG_ALGORITHM, power_schedule, split_seed,
                        uniform_decay)

ALPHA_GRID = (0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0)
EPSILON_GRID = (0.1, 0.01, 0.001, 0.0001)
AMPLITUDE_GRID = (0.1, 0.001)

DEFAULT_RUNS = 100
DEFAULT_CAP = 100_000
_LN2 = math.log(2.0)


class AllRunsFailedError(RuntimeError):
    """Every run of a cell hit the iteration cap."""


class NoSignChangeError(ValueError):
    """Bisection bracket endpoints do not straddle a root."""


@dataclass(frozen=True)
class BenchCell:
    """Mean iterations to meet |f(x_n) - x_n| < epsilon, over `runs` runs."""

    amplitude: float
    alpha: float
    epsilon: float
    runs: int
    base_seed: int
    mean_iterations: float
    std_iterations: float
    failures: int

    @property
    def key(self) -> tuple[float, float, float]:
        return (self.amplitude, self.alpha, self.epsilon)


@dataclass(frozen=True)
class BenchReport:
    grid: tuple[BenchCell, ...]
    bisection_counts: dict
    metadata: dict

    def cell(self, amplitude: float, alpha: float, epsilon: float) -> BenchCell:
        for c in self.grid:
            if c.key == (amplitude, alpha, epsilon):
                return c
        raise KeyError(f"no cell ({amplitude}, {alpha}, {epsilon})")


def run_cell(amplitude: float, alpha: float, epsilon: float, runs: int,
             base_seed: int, cap: int = DEFAULT_CAP) -> BenchCell:
    """One Monte Carlo cell on the benchmark map.

    Run k derives a child stream from (base_seed, k); its first child
    seeds the uniform x0 draw and its second seeds the error model.
    """
    if not amplitude > 0.0:
        raise ValueError("amplitude must be positive")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if runs < 1:
        raise ValueError("runs must be positive")
    map_ = benchmark_map()
    schedule = power_schedule(alpha)
    stop = StoppingRule(epsilon=epsilon, max_iterations=cap)
    counts: list[int] = []
    failures = 0
    for k in range(runs):
        ss = SeedSequence(base_seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(k,))
        x0_ss, err_ss = ss.spawn(2)
        x0 = Generator(PCG64(x0_ss)).random()
        error = uniform_decay(amplitude, int(err_ss.generate_state(1, dtype=np.uint64)[0]))
        traj = run(map_, schedule, error, x0, stop, projected=True, store_cap=2)
        if traj.stop_reason == ITERATION_CAP:
            failures += 1
        else:
            counts.append(traj.iterations_used)
    if not counts:
        raise AllRunsFailedError(
            f"all {runs} runs hit the cap {cap} for (A={amplitude}, "
            f"alpha={alpha}, epsilon={epsilon})")
    return BenchCell(amplitude=amplitude, alpha=alpha, epsilon=epsilon,
                     runs=runs, base_seed=base_seed,
                     mean_iterations=fmean(counts),
                     std_iterations=pstdev(counts), failures=failures)


def reproduce_tables(runs: int = DEFAULT_RUNS, base_seed: int = 0,
                     cap: int = DEFAULT_CAP) -> BenchReport:
    """The full grid: alpha in ALPHA_GRID x epsilon in EPSILON_GRID for both
    amplitudes, plus the bisection baseline counts for each epsilon.

    A cell whose runs all hit the cap is kept in the grid with NaN
    statistics and failures == runs rather than aborting the sweep.
    """
    cells = []
    for ai, amplitude in enumerate(AMPLITUDE_GRID):
        for ji, alpha in enumerate(ALPHA_GRID):
            group_seed = split_seed(base_seed, ai, ji)
            for epsilon in EPSILON_GRID:
                try:
                    cells.append(run_cell(amplitude, alpha, epsilon, runs,
                                          group_seed, cap))
                except AllRunsFailedError:
                    cells.append(BenchCell(
                        amplitude=amplitude, alpha=alpha, epsilon=epsilon,
                        runs=runs, base_seed=group_seed,
                        mean_iterations=math.nan, std_iterations=math.nan,
                        failures=runs))
    counts = {eps: bisection_count(eps) for eps in EPSILON_GRID}
    metadata = {
        "rng": RNG_ALGORITHM,
        "base_seed": str(base_seed),
        "runs": str(runs),
        "cap": str(cap),
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    return BenchReport(grid=tuple(cells), bisection_counts=counts,
                       metadata=metadata)


def bisection_count(epsilon: float) -> int:
    """floor(-log(epsilon) / log(2)): halvings of a unit bracket needed for
    precision epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon = {epsilon!r} must lie in (0, 1)")
    return math.floor(-math.log(epsilon) / _LN2)


def bisection_run(map_: ScalarMap, lo: float, hi: float, epsilon: float
                  ) -> tuple[float, int]:
    """Interval halving on f(x) - x until the bracket is narrower than
    epsilon; returns the final midpoint and the number of halvings."""
    if not (0.0 <= lo < hi <= 1.0):
        raise DomainError(f"bracket [{lo!r}, {hi!r}] must satisfy 0 <= lo < hi <= 1")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    g_lo = residual(map_, lo)
    g_hi = residual(map_, hi)
    if g_lo * g_hi > 0.0:
        raise NoSignChangeError(
            f"f(x) - x has the same sign at {lo!r} and {hi!r}")
    iterations = 0
    while hi - lo >= epsilon:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # bracket at floating-point resolution
        g_mid = residual(map_, mid)
        iterations += 1
        if g_lo * g_mid <= 0.0:
            hi, g_hi = mid, g_mid
        else:
            lo, g_lo = mid, g_mid
    return 0.5 * (lo + hi), iterations


def _fmt_stat(v: float) -> str:
    return "" if math.isnan(v) else repr(v)


def write_report_csv(report: BenchReport, out: IO[str]) -> None:
    """One row per cell: A, alpha, epsilon, K, mean, std, failures, base_seed.

    Header comments carry the RNG name, seed, cap, version, and the
    bisection baseline; the timestamp stays out so identical configurations
    serialize byte-identically.
    """
    for key in ("rng", "base_seed", "runs", "cap", "version"):
        if key in report.metadata:
            out.write(f"# {key} {report.metadata[key]}\n")
    for eps, count in sorted(report.bisection_counts.items(), reverse=True):
        out.write(f"# bisection epsilon={eps!r} iterations={count}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["A", "alpha", "epsilon", "K", "mean", "std",
                     "failures", "base_seed"])
    for c in report.grid:
        writer.writerow([repr(c.amplitude), repr(c.alpha), repr(c.epsilon),
                         c.runs, _fmt_stat(c.mean_iterations),
                         _fmt_stat(c.std_iterations), c.failures, c.base_seed])


def format_tables(report: BenchReport) -> str:
    """Aligned text tables, one block per amplitude: rows alpha, columns
    epsilon, plus the bisection baseline row."""
    amplitudes = sorted({c.amplitude for c in report.grid}, reverse=True)
    alphas = sorted({c.alpha for c in report.grid})
    epsilons = sorted({c.epsilon for c in report.grid}, reverse=True)
    by_key = {c.key: c for c in report.grid}
    lines = []
    for amplitude in amplitudes:
        lines.append(f"mean iterations N(A={amplitude:g}, alpha, epsilon), "
                     f"K={report.metadata.get('runs', '?')} runs per cell")
        header = ["alpha\\eps"] + [f"{e:g}" for e in epsilons]
        rows = [header]
        for alpha in alphas:
            row = [f"{alpha:g}"]
            for eps in epsilons:
                cell = by_key.get((amplitude, alpha, eps))
                if cell is None or math.isnan(cell.mean_iterations):
                    row.append("failed")
                else:
                    row.append(f"{cell.mean_iterations:.2f}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        for r in rows:
            lines.append("  ".join(s.rjust(w) for s, w in zip(r, widths)))
        lines.append("")
    baseline = "  ".join(f"eps={eps:g}: {cnt}" for eps, cnt
                         in sorted(report.bisection_counts.items(), reverse=True))
    lines.append(f"bisection baseline iterations  {baseline}")
    return "\n".join(lines) + "\n"
