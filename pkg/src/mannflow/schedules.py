"""Step-size schedules and perturbation models, with convergence checks.

The discrete process needs a step sequence theta_n in [0,1] and an error
sequence r_n; the ODE analogue needs their continuous counterparts
theta(t) and r(t).  validate_hypotheses decides, in closed form for the
supported families, the four conditions under which the perturbed
iteration still converges to a fixed point:

    (1) theta_n -> 0        (2) sum theta_n diverges
    (3) r_n / theta_n -> 0  (4) sum r_n converges

Stochastic error streams use numpy's PCG64 generator seeded through
SeedSequence, so runs are reproducible bit-exactly and independent
streams can be split by (seed, run-index) without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.random import Generator, PCG64, SeedSequence

RNG_ALGORITHM = "PCG64"

POWER = "power"
CLASSIC_MANN = "classic_mann"
CONSTANT = "constant"
CUSTOM = "custom"

ZERO = "zero"
UNIFORM_DECAY = "uniform_decay"
DETERMINISTIC = "deterministic"

HOLDS = "holds"
FAILS = "fails"
UNKNOWN = "unknown"

_CUSTOM_SAMPLE_TERMS = 100_000
_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def _as_seed(seed: int) -> int:
    return int(seed) & _SEED_MASK


def split_seed(base_seed: int, *key: int) -> int:
    """Derive an independent 64-bit seed from a base seed and an index key."""
    ss = SeedSequence(_as_seed(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ThetaSchedule:
    """Averaging weights: a sequence n -> theta_n and a function t -> theta(t).

    Families: power(alpha > 0) with theta_n = (n+1)^(-alpha) and
    theta(t) = (1+t)^(-alpha); classic_mann (power with alpha = 1);
    constant(value in [0,1]); custom (user callables).
    """

    family: str
    alpha: float = 1.0
    value: float = 0.0
    fn: Optional[Callable[[int], float]] = None
    fn_t: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.family in (POWER, CLASSIC_MANN):
            if not self.alpha > 0.0:
                raise ValueError("power schedule needs alpha > 0")
        elif self.family == CONSTANT:
            if not 0.0 <= self.value <= 1.0:
                raise ValueError("constant schedule needs a value in [0, 1]")
        elif self.family == CUSTOM:
            if self.fn is None:
                raise ValueError("custom schedule needs a discrete callable")
        else:
            raise ValueError(f"unknown schedule family {self.family!r}")

    def describe(self) -> str:
        if self.family in (POWER, CLASSIC_MANN):
            return f"{self.family}:alpha={self.alpha!r}"
        if self.family == CONSTANT:
            return f"constant:value={self.value!r}"
        return "custom"


def power_schedule(alpha: float) -> ThetaSchedule:
    return ThetaSchedule(family=POWER, alpha=float(alpha))


def classic_mann_schedule() -> ThetaSchedule:
    """theta_n = 1/(n+1), the original averaging weights."""
    return ThetaSchedule(family=CLASSIC_MANN, alpha=1.0)


def constant_schedule(value: float) -> ThetaSchedule:
    return ThetaSchedule(family=CONSTANT, value=float(value))


def custom_schedule(fn: Callable[[int], float],
                    fn_t: Optional[Callable[[float], float]] = None) -> ThetaSchedule:
    return ThetaSchedule(family=CUSTOM, fn=fn, fn_t=fn_t)


def theta_at(schedule: ThetaSchedule, n: int) -> float:
    """theta_n; power family computed as exp(-alpha * ln(n+1))."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if schedule.family in (POWER, CLASSIC_MANN):
        return math.exp(-schedule.alpha * math.log(n + 1.0))
    if schedule.family == CONSTANT:
        return schedule.value
    v = schedule.fn(n)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"custom schedule produced theta_{n} = {v!r} outside [0, 1]")
    return v


def theta_at_time(schedule: ThetaSchedule, t: float) -> float:
    """theta(t); power family is (1+t)^(-alpha)."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if schedule.family in (POWER, CLASSIC_MANN):
        return math.exp(-schedule.alpha * math.log1p(t))
    if schedule.family == CONSTANT:
        return schedule.value
    if schedule.fn_t is None:
        raise ValueError("custom schedule has no continuous evaluator")
    return schedule.fn_t(t)


class ErrorModel:
    """Additive perturbation: a sequence n -> r_n and a function t -> r(t).

    uniform_decay draws M_n i.i.d. uniform on [-1, 1] (as 2u - 1 from a
    uniform [0,1) double) and returns amplitude * M_n / (1 + n^2); its
    continuous analogue is amplitude * sin(3t) / (1 + t^2), a smooth
    integrable perturbation with the same closed-form envelope family.
    Each instance owns a private PCG64 stream keyed by its seed; draws are
    cached by index, so repeated reads are bit-identical and the stream is
    consumed in order no matter how callers interleave.
    """

    def __init__(self, family: str, amplitude: float = 0.0, seed: int = 0,
                 fn: Optional[Callable[[int], float]] = None,
                 fn_t: Optional[Callable[[float], float]] = None):
        if family not in (ZERO, UNIFORM_DECAY, DETERMINISTIC):
            raise ValueError(f"unknown error family {family!r}")
        if family == UNIFORM_DECAY and not amplitude > 0.0:
            raise ValueError("uniform_decay needs amplitude > 0")
        if family == DETERMINISTIC and fn is None:
            raise ValueError("deterministic error needs a sequence callable")
        self.family = family
        self.amplitude = float(amplitude)
        self.seed = _as_seed(seed)
        self.fn = fn
        self.fn_t = fn_t
        self._draws: list[float] = []
        self._gen: Optional[Generator] = None
        if family == UNIFORM_DECAY:
            self._gen = Generator(PCG64(SeedSequence(self.seed)))

    def at(self, n: int) -> float:
        """r_n.  For uniform_decay, |r_n| <= amplitude / (1 + n^2)."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        if self.family == ZERO:
            return 0.0
        if self.family == DETERMINISTIC:
            return self.fn(n)
        draws = self._draws
        if n >= len(draws):
            # Prefetch a block; batch draws equal the one-at-a-time stream.
            take = max(n + 1 - len(draws), 32)
            draws.extend((2.0 * self._gen.random(take) - 1.0).tolist())
        return self.amplitude * draws[n] / (1.0 + n * n)

    def at_time(self, t: float) -> float:
        """r(t)."""
        if t < 0.0:
            raise ValueError("t must be nonnegative")
        if self.family == ZERO:
            return 0.0
        if self.family == UNIFORM_DECAY:
            return self.amplitude * math.sin(3.0 * t) / (1.0 + t * t)
        if self.fn_t is None:
            raise ValueError("deterministic error has no continuous evaluator")
        return self.fn_t(t)

    def describe(self) -> str:
        if self.family == ZERO:
            return "zero"
        if self.family == UNIFORM_DECAY:
            return f"uniform_decay:A={self.amplitude!r}:seed={self.seed}"
        return "deterministic"


def zero_error() -> ErrorModel:
    return ErrorModel(ZERO)


def uniform_decay(amplitude: float, seed: int) -> ErrorModel:
    return ErrorModel(UNIFORM_DECAY, amplitude=amplitude, seed=seed)


def deterministic_error(fn: Callable[[int], float],
                        fn_t: Optional[Callable[[float], float]] = None) -> ErrorModel:
    return ErrorModel(DETERMINISTIC, fn=fn, fn_t=fn_t)


def error_at(model: ErrorModel, n: int) -> float:
    return model.at(n)


def error_at_time(model: ErrorModel, t: float) -> float:
    return model.at_time(t)


@dataclass(frozen=True)
class Verdict:
    status: str  # holds | fails | unknown
    reason: str


@dataclass(frozen=True)
class HypothesisReport:
    """Verdicts for the four convergence conditions, with justifications."""

    theta_vanishes: Verdict
    theta_sum_diverges: Verdict
    ratio_vanishes: Verdict
    error_sum_converges: Verdict

    def all_hold(self) -> bool:
        return all(v.status == HOLDS for v in self._verdicts())

    def _verdicts(self) -> tuple[Verdict, ...]:
        return (self.theta_vanishes, self.theta_sum_diverges,
                self.ratio_vanishes, self.error_sum_converges)

    def lines(self) -> list[str]:
        labels = ("theta_n -> 0", "sum theta_n diverges",
                  "r_n / theta_n -> 0", "sum r_n converges")
        return [f"{label}: {v.status.upper()} ({v.reason})"
                for label, v in zip(labels, self._verdicts())]


def _theta_verdicts(schedule: ThetaSchedule) -> tuple[Verdict, Verdict]:
    if schedule.family in (POWER, CLASSIC_MANN):
        a = schedule.alpha
        vanish = Verdict(HOLDS, f"(n+1)^(-{a:g}) -> 0 since alpha > 0")
        if a <= 1.0:
            diverge = Verdict(HOLDS, f"p-series with exponent {a:g} <= 1 diverges")
        else:
            diverge = Verdict(FAILS, f"p-series with exponent {a:g} > 1 converges")
        return vanish, diverge
    if schedule.family == CONSTANT:
        v = schedule.value
        if v > 0.0:
            return (Verdict(FAILS, f"constant theta_n = {v:g} does not vanish"),
                    Verdict(HOLDS, f"sum of constant {v:g} > 0 diverges"))
        return (Verdict(HOLDS, "theta is identically 0"),
                Verdict(FAILS, "sum of zeros converges to 0"))
    # custom: sample a prefix; a finite sample can only refute, never prove
    for n in range(_CUSTOM_SAMPLE_TERMS):
        v = schedule.fn(n)
        if not 0.0 <= v <= 1.0:
            bad = Verdict(FAILS, f"theta_{n} = {v!r} lies outside [0, 1]")
            return bad, Verdict(UNKNOWN, "no closed form for custom schedules")
    unknown = Verdict(UNKNOWN,
                      f"first {_CUSTOM_SAMPLE_TERMS} terms in range; limit undecidable")
    return unknown, Verdict(UNKNOWN, "series divergence undecidable from finitely many terms")


def _error_verdicts(schedule: ThetaSchedule, model: ErrorModel) -> tuple[Verdict, Verdict]:
    if model.family == ZERO:
        return (Verdict(HOLDS, "r is identically 0"),
                Verdict(HOLDS, "sum of zeros converges"))
    if model.family == UNIFORM_DECAY:
        a_amp = model.amplitude
        converges = Verdict(
            HOLDS, f"|r_n| <= {a_amp:g}/(1+n^2) and sum 1/(1+n^2) is finite")
        if schedule.family in (POWER, CLASSIC_MANN):
            a = schedule.alpha
            if a < 2.0:
                ratio = Verdict(HOLDS,
                                f"envelope {a_amp:g}*(n+1)^{a:g}/(1+n^2) -> 0 for alpha < 2")
            else:
                ratio = Verdict(FAILS,
                                f"envelope {a_amp:g}*(n+1)^{a:g}/(1+n^2) does not vanish for alpha >= 2")
            return ratio, converges
        if schedule.family == CONSTANT:
            if schedule.value > 0.0:
                return (Verdict(HOLDS, f"r_n -> 0 against constant theta = {schedule.value:g}"),
                        converges)
            return Verdict(UNKNOWN, "ratio undefined for theta identically 0"), converges
        return Verdict(UNKNOWN, "no closed form against custom schedules"), converges
    return (Verdict(UNKNOWN, "no closed form for user-supplied error sequences"),
            Verdict(UNKNOWN, "series convergence undecidable from finitely many terms"))


def validate_hypotheses(schedule: ThetaSchedule, model: ErrorModel) -> HypothesisReport:
    """Closed-form verdicts for the four convergence conditions.

    For the stochastic family the ratio and series checks test the
    deterministic envelope amplitude/(1+n^2), which bounds every
    realization, rather than any single realized sequence.
    """
    vanish, diverge = _theta_verdicts(schedule)
    ratio, converges = _error_verdicts(schedule, model)
    return HypothesisReport(theta_vanishes=vanish, theta_sum_diverges=diverge,
                            ratio_vanishes=ratio, error_sum_converges=converges)
