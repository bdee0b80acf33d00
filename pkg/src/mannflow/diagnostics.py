"""Finite-tail surrogates for limit behaviour of a run.

The set of subsequential limits of a bounded sequence is not computable
from finitely many terms; these helpers report honest finite estimates
instead: the min/max envelope of a tail window, the largest consecutive
step over the window, and the nearest known fixed point when one is
within tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

DEFAULT_CLASSIFY_TOL = 0.05
MIN_WINDOW = 50


class InsufficientLengthError(ValueError):
    """Trajectory is shorter than the requested tail window needs."""


def _series(traj) -> tuple[Sequence[float], int]:
    """Values and the true index of the first one, for trajectories
    (discrete or continuous, possibly head-truncated) or plain sequences."""
    values = getattr(traj, "iterates", None)
    if values is not None:
        return values, traj.first_stored_index
    values = getattr(traj, "states", None)
    if values is not None:
        return values, 0
    return traj, 0


def default_window(length: int) -> int:
    """Tail window: 50 iterates or 10% of the run, whichever is larger,
    but never the whole run."""
    return min(max(MIN_WINDOW, length // 10), length - 1)


def tail_interval(traj, window: int) -> Tuple[float, float]:
    """Min and max over the last `window` values: a finite outer estimate
    of where the tail accumulates."""
    values, _ = _series(traj)
    if window < 1:
        raise ValueError("window must be positive")
    if len(values) < window + 1:
        raise InsufficientLengthError(
            f"need at least {window + 1} values, have {len(values)}")
    tail = values[-window:]
    return min(tail), max(tail)


def step_diff_sup(traj, window: int) -> float:
    """Largest |x_{n+1} - x_n| over the last `window` steps."""
    values, _ = _series(traj)
    if window < 1:
        raise ValueError("window must be positive")
    if len(values) < window + 1:
        raise InsufficientLengthError(
            f"need at least {window + 1} values, have {len(values)}")
    tail = values[-(window + 1):]
    return max(abs(b - a) for a, b in zip(tail, tail[1:]))


def classify_limit(x: float, fixed_points: Sequence[float], tol: float
                   ) -> Optional[Tuple[float, float]]:
    """Nearest fixed point and its distance |x - p|, if within tol.

    Exact midpoint ties resolve to the smaller fixed point.
    """
    if not fixed_points:
        raise ValueError("fixed_points must be non-empty")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    best = min(fixed_points, key=lambda p: (abs(x - p), p))
    dist = abs(x - best)
    return (best, dist) if dist <= tol else None


@dataclass(frozen=True)
class TailSummary:
    window_start: int
    interval_low: float
    interval_high: float
    max_step_diff: float
    classified_limit: Optional[float] = None
    distance_to_limit: Optional[float] = None

    def lines(self) -> list[str]:
        out = [
            f"tail window starts at n = {self.window_start}",
            f"tail interval estimate: [{self.interval_low!r}, {self.interval_high!r}]",
            f"max consecutive step in window: {self.max_step_diff!r}",
        ]
        if self.classified_limit is not None:
            out.append(f"classified limit: {self.classified_limit!r} "
                       f"(distance {self.distance_to_limit!r})")
        else:
            out.append("classified limit: none within tolerance")
        return out

    CSV_HEADER = ("window_start,interval_low,interval_high,max_step_diff,"
                  "classified_limit,distance_to_limit")

    def csv_row(self) -> str:
        limit = "" if self.classified_limit is None else repr(self.classified_limit)
        dist = "" if self.distance_to_limit is None else repr(self.distance_to_limit)
        return (f"{self.window_start},{self.interval_low!r},"
                f"{self.interval_high!r},{self.max_step_diff!r},{limit},{dist}")


def summarize_tail(traj, window: Optional[int] = None,
                   fixed_points: Sequence[float] = (),
                   tol: float = DEFAULT_CLASSIFY_TOL) -> TailSummary:
    """Bundle the tail diagnostics for one trajectory."""
    values, start = _series(traj)
    if len(values) < 2:
        # Degenerate but legal: a run that stopped at its initial point.
        x = values[-1]
        hit = classify_limit(x, fixed_points, tol) if fixed_points else None
        return TailSummary(window_start=start, interval_low=x, interval_high=x,
                           max_step_diff=0.0,
                           classified_limit=hit[0] if hit else None,
                           distance_to_limit=hit[1] if hit else None)
    if window is None:
        window = default_window(len(values))
    low, high = tail_interval(values, window)
    diff = step_diff_sup(values, window)
    hit = classify_limit(values[-1], fixed_points, tol) if fixed_points else None
    return TailSummary(window_start=start + len(values) - window,
                       interval_low=low, interval_high=high, max_step_diff=diff,
                       classified_limit=hit[0] if hit else None,
                       distance_to_limit=hit[1] if hit else None)
