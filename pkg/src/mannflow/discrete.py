"""The averaged fixed-point iteration with additive perturbation.

One step is x_{n+1} = (1 - theta_n) x_n + theta_n f(x_n) + r_n.  In
projected mode the raw step is clamped back into [0,1] and the recorded
error is the effective one, Pi(y_n + noise_n) - y_n with
y_n = (1 - theta_n) x_n + theta_n f(x_n), so |recorded| never exceeds the
raw noise envelope.  In unprojected mode a step leaving [0,1] ends the
run with stop reason "diverged": the convergence theory presumes the
iterates stay in the interval, so leaving it flags an invalid
configuration rather than a solver bug.
"""

from __future__ import annotations

import csv
import hashlib
from collections import deque
from dataclasses import dataclass
from typing import IO, Optional

from .maps import DomainError, ScalarMap
from .schedules import ErrorModel, ThetaSchedule, theta_at

RESIDUAL_MET = "residual_met"
ITERATION_CAP = "iteration_cap"
DIVERGED = "diverged"

DEFAULT_MAX_ITERATIONS = 1_000_000
DEFAULT_STORE_CAP = 100_000


@dataclass(frozen=True)
class StoppingRule:
    """Stop at the first n with |f(x_n) - x_n| < epsilon, or at the cap."""

    epsilon: float
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class Trajectory:
    """Record of one run.

    iterates holds the newest store_cap points (everything, for runs that
    fit); realized_errors[i] is the error actually applied at the step
    producing iterates[i+1].  iterations_used is the true step count, so
    iterations_used == len(iterates) - 1 exactly when nothing was dropped.
    """

    iterates: tuple[float, ...]
    realized_errors: tuple[float, ...]
    stop_reason: str
    iterations_used: int
    config_fingerprint: str

    @property
    def last(self) -> float:
        return self.iterates[-1]

    @property
    def truncated(self) -> bool:
        return len(self.iterates) != self.iterations_used + 1

    @property
    def first_stored_index(self) -> int:
        """True index n of iterates[0] (0 unless the head was dropped)."""
        return self.iterations_used + 1 - len(self.iterates)


def mann_step(x: float, theta: float, fx: float, r: float) -> float:
    """(1 - theta) * x + theta * fx + r, exactly in that arrangement."""
    return (1.0 - theta) * x + theta * fx + r


def project_unit(x: float) -> float:
    """Nearest point of [0, 1]: 0 for x <= 0, x inside, 1 for x >= 1."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return x


def config_fingerprint(map_: ScalarMap, schedule: ThetaSchedule, error: ErrorModel,
                       x0: float, stop: StoppingRule, projected: bool) -> str:
    payload = "|".join([
        map_.describe(), schedule.describe(), error.describe(),
        repr(float(x0)), repr(stop.epsilon), str(stop.max_iterations),
        str(bool(projected)),
    ])
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def run(map_: ScalarMap, schedule: ThetaSchedule, error: ErrorModel, x0: float,
        stop: StoppingRule, projected: bool = True,
        store_cap: int = DEFAULT_STORE_CAP) -> Trajectory:
    """Iterate the perturbed process from x0 until the stopping rule fires.

    The residual test is evaluated on x_n before x_{n+1} is computed, so a
    fixed-point initial condition costs zero steps and one map evaluation.
    The error model's stream is consumed in step order, one draw per step.
    """
    if not 0.0 <= x0 <= 1.0:
        raise DomainError(f"x0 = {x0!r} lies outside [0, 1]")
    if store_cap < 2:
        raise ValueError("store_cap must be at least 2")
    fingerprint = config_fingerprint(map_, schedule, error, x0, stop, projected)
    iterates: deque[float] = deque(maxlen=store_cap)
    realized: deque[float] = deque(maxlen=store_cap)
    x = float(x0)
    iterates.append(x)
    n = 0
    while True:
        fx = map_(x)
        if abs(fx - x) < stop.epsilon:
            reason = RESIDUAL_MET
            break
        if n >= stop.max_iterations:
            reason = ITERATION_CAP
            break
        y = mann_step(x, theta_at(schedule, n), fx, 0.0)
        noise = error.at(n)
        raw = y + noise
        if projected:
            nxt = project_unit(raw)
            realized.append(nxt - y)
        else:
            if not 0.0 <= raw <= 1.0:
                reason = DIVERGED  # offending point is not recorded
                break
            nxt = raw
            realized.append(noise)
        iterates.append(nxt)
        x = nxt
        n += 1
    return Trajectory(iterates=tuple(iterates), realized_errors=tuple(realized),
                      stop_reason=reason, iterations_used=n,
                      config_fingerprint=fingerprint)


def write_trajectory_csv(traj: Trajectory, map_: ScalarMap, schedule: ThetaSchedule,
                         out: IO[str], metadata: Optional[dict] = None) -> None:
    """Columns n, x_n, theta_n, r_n, residual; fingerprint in a '#' header.

    r_n is the realized error applied at step n; the final row has none.
    Floats are written with repr for lossless round-tripping.
    """
    out.write(f"# config {traj.config_fingerprint}\n")
    for key, value in (metadata or {}).items():
        out.write(f"# {key} {value}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n", "x_n", "theta_n", "r_n", "residual"])
    start = traj.first_stored_index
    err_start = traj.iterations_used - len(traj.realized_errors)
    for i, x in enumerate(traj.iterates):
        n = start + i
        k = n - err_start
        r = repr(traj.realized_errors[k]) if 0 <= k < len(traj.realized_errors) else ""
        writer.writerow([n, repr(x), repr(theta_at(schedule, n)), r,
                         repr(map_(x) - x)])
