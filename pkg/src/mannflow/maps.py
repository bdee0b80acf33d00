"""Continuous self-maps of the unit interval.

Maps are either piecewise-linear (stored as knots, so fixed points are
enumerable in closed form per segment) or analytic (a plain callable).
All evaluations are pure; map values are immutable and freely shareable.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple

PIECEWISE_LINEAR = "piecewise_linear"
ANALYTIC = "analytic"

# Root of cos(x) = x on [0, 1], correct to double precision.
COS_FIXED_POINT = 0.7390851332151607

# Tolerance used when registering known fixed points of a map.
FIXED_POINT_RESIDUAL_TOL = 1e-12


class DomainError(ValueError):
    """Argument lies outside the map's domain [0, 1]."""


class DegenerateSegmentError(ValueError):
    """A piecewise-linear segment coincides with the diagonal y = x,
    so the segment is a continuum of fixed points."""


def _check_domain(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x = {x!r} lies outside [0, 1]")
    return float(x)


@dataclass(frozen=True)
class ScalarMap:
    """A continuous map of [0, 1] into itself.

    kind is "piecewise_linear" (knots present) or "analytic" (fn present).
    known_fixed_points, when given, must each satisfy |f(p) - p| <= 1e-12.
    """

    kind: str
    name: str
    knots: Tuple[Tuple[float, float], ...] = ()
    fn: Optional[Callable[[float], float]] = None
    known_fixed_points: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == PIECEWISE_LINEAR:
            if len(self.knots) < 2:
                raise ValueError("piecewise-linear map needs at least two knots")
            xs = [k[0] for k in self.knots]
            if xs[0] != 0.0 or xs[-1] != 1.0:
                raise ValueError("knots must span exactly [0, 1]")
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("knot abscissae must be strictly increasing")
            if any(not 0.0 <= y <= 1.0 for _, y in self.knots):
                raise ValueError("knot ordinates must lie in [0, 1]")
            object.__setattr__(self, "_xs", tuple(xs))
        elif self.kind == ANALYTIC:
            if self.fn is None:
                raise ValueError("analytic map needs a callable")
        else:
            raise ValueError(f"unknown map kind {self.kind!r}")
        fps = tuple(sorted(float(p) for p in self.known_fixed_points))
        object.__setattr__(self, "known_fixed_points", fps)
        for p in fps:
            if abs(self(p) - p) > FIXED_POINT_RESIDUAL_TOL:
                raise ValueError(f"registered fixed point {p!r} has residual > 1e-12")

    def __call__(self, x: float) -> float:
        x = _check_domain(x)
        if self.kind == ANALYTIC:
            return self.fn(x)
        # Half-open segments [x_i, x_{i+1}); x = 1 falls into the last one.
        # Adjacent segments agree at shared knots, so the choice is value-neutral.
        i = bisect_right(self._xs, x) - 1
        if i >= len(self.knots) - 1:
            i = len(self.knots) - 2
        x0, y0 = self.knots[i]
        x1, y1 = self.knots[i + 1]
        return y0 + (y1 - y0) * ((x - x0) / (x1 - x0))

    def describe(self) -> str:
        """Canonical one-line description, used in config fingerprints."""
        if self.kind == PIECEWISE_LINEAR:
            knots = ";".join(f"{x!r},{y!r}" for x, y in self.knots)
            return f"piecewise_linear:{self.name}:{knots}"
        return f"analytic:{self.name}"


def residual(map_: ScalarMap, x: float) -> float:
    """f(x) - x; zero exactly at fixed points."""
    return map_(x) - x


# The four-branch benchmark map: 2(1/4 - x), 4(x - 1/4), 4(3/4 - x), 2(x - 3/4)
# on [0,1/4], [1/4,1/2], [1/2,3/4], [3/4,1].  Its knots encode those branches
# exactly; the fixed points are 1/6, 1/3, 3/5.
BENCHMARK_KNOTS = ((0.0, 0.5), (0.25, 0.0), (0.5, 1.0), (0.75, 0.0), (1.0, 0.5))

_BENCHMARK = ScalarMap(
    kind=PIECEWISE_LINEAR,
    name="paper-sec4",
    knots=BENCHMARK_KNOTS,
    known_fixed_points=(1.0 / 6.0, 1.0 / 3.0, 3.0 / 5.0),
)

_COSINE = ScalarMap(
    kind=ANALYTIC,
    name="cosine",
    fn=math.cos,
    known_fixed_points=(COS_FIXED_POINT,),
)


def benchmark_map() -> ScalarMap:
    """The four-branch piecewise-linear map with fixed points 1/6, 1/3, 3/5."""
    return _BENCHMARK


def eval_benchmark_map(x: float) -> float:
    return _BENCHMARK(x)


def unique_fixed_point_map() -> ScalarMap:
    """cos restricted to [0, 1]: a self-map with exactly one fixed point."""
    return _COSINE


def piecewise_linear_map(knots: Iterable[Sequence[float]], name: str = "piecewise",
                         known_fixed_points: Sequence[float] = ()) -> ScalarMap:
    pts = tuple((float(x), float(y)) for x, y in knots)
    return ScalarMap(kind=PIECEWISE_LINEAR, name=name, knots=pts,
                     known_fixed_points=tuple(known_fixed_points))


def constant_map(c: float) -> ScalarMap:
    if not 0.0 <= c <= 1.0:
        raise ValueError("constant level must lie in [0, 1]")
    return piecewise_linear_map([(0.0, c), (1.0, c)], name=f"const:{c!r}",
                                known_fixed_points=(c,))


def identity_map() -> ScalarMap:
    return piecewise_linear_map([(0.0, 0.0), (1.0, 1.0)], name="identity")


def constant_value(map_: ScalarMap) -> Optional[float]:
    """The constant level of a flat piecewise-linear map, or None."""
    if map_.kind != PIECEWISE_LINEAR:
        return None
    ys = {y for _, y in map_.knots}
    return ys.pop() if len(ys) == 1 else None


def enumerate_fixed_points(map_: ScalarMap, tol: float = 1e-9) -> list[float]:
    """All fixed points of a piecewise-linear map, solved segment by segment.

    Each segment's line y(x) = x is solved in closed form; roots inside the
    segment are kept and roots duplicated at shared knots are merged within
    tol.  A segment lying on the diagonal raises DegenerateSegmentError
    because it carries a continuum of fixed points.
    """
    if map_.kind != PIECEWISE_LINEAR:
        raise ValueError("fixed-point enumeration needs a piecewise-linear map")
    roots: list[float] = []
    for (x0, y0), (x1, y1) in zip(map_.knots, map_.knots[1:]):
        if y0 == x0 and y1 == x1:
            raise DegenerateSegmentError(
                f"segment [{x0}, {x1}] equals the diagonal: continuum of fixed points")
        m = (y1 - y0) / (x1 - x0)
        if m == 1.0:
            continue  # parallel to the diagonal, no crossing
        r = (y0 - m * x0) / (1.0 - m)
        if x0 - 1e-12 <= r <= x1 + 1e-12:
            roots.append(min(max(r, x0), x1))
    roots.sort()
    out: list[float] = []
    for r in roots:
        if not out or r - out[-1] > tol:
            out.append(r)
    return out


_REGISTRY = {
    "paper-sec4": benchmark_map,
    "cosine": unique_fixed_point_map,
    "identity": identity_map,
}


def registry_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY)) + ("const:<level>",)


def get_map(name: str) -> ScalarMap:
    """Look up a registered map by name ("paper-sec4", "cosine", "identity",
    or "const:<level>" for a constant map)."""
    if name in _REGISTRY:
        return _REGISTRY[name]()
    if name.startswith("const:"):
        return constant_map(float(name.split(":", 1)[1]))
    raise KeyError(f"unknown map {name!r}; known: {', '.join(registry_names())}")


def load_knots(path) -> ScalarMap:
    """Read a piecewise-linear map from a text file of "x y" pairs,
    one per line, strictly increasing in x; '#' starts a comment."""
    pts = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{ln}: expected 'x y', got {line!r}")
            pts.append((float(parts[0]), float(parts[1])))
    return piecewise_linear_map(pts, name=str(path))
