"""Discretized curves and rectangular surface patches in parameter space."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ClosureError, SchemaError
from .model import ParameterPoint

CLOSURE_TOL = 1e-12


def _wrapped_gap(a: np.ndarray, b: np.ndarray, names, periods: Mapping[str, float]) -> float:
    gap = np.abs(np.asarray(b, float) - np.asarray(a, float))
    for i, name in enumerate(names):
        period = periods.get(name)
        if period:
            r = math.remainder(gap[i], period)
            gap[i] = abs(r)
    return float(gap.max(initial=0.0))


@dataclass(frozen=True)
class ParamPath:
    """An ordered list of waypoints, optionally closed.

    ``points`` has shape ``(steps + 1, d)`` and columns ordered as ``names``.
    When ``curve`` and ``velocity`` are set (functions of ``t`` in [0, 1],
    vectorized) integrals sample the analytic curve at segment midpoints in
    ``t``; otherwise chord midpoints and chord displacements are used.
    A closed path returns to its start modulo any declared ``periods``.
    """

    names: tuple[str, ...]
    points: np.ndarray
    closed: bool = False
    periods: Mapping[str, float] = field(default_factory=dict)
    curve: Callable[[np.ndarray], np.ndarray] | None = None
    velocity: Callable[[np.ndarray], np.ndarray] | None = None
    cyclic: str | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != len(self.names):
            raise SchemaError(f"points must have shape (n, {len(self.names)}), got {pts.shape}")
        if pts.shape[0] < 2:
            raise SchemaError("a path needs at least two waypoints")
        if not np.all(np.isfinite(pts)):
            raise SchemaError("non-finite waypoint coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "names", tuple(self.names))
        if self.closed:
            gap = _wrapped_gap(pts[0], pts[-1], self.names, self.periods)
            if gap > CLOSURE_TOL:
                raise ClosureError(
                    f"closed path: last waypoint (index {len(pts) - 1}) differs from the first by {gap:.3g}"
                )

    @property
    def steps(self) -> int:
        return self.points.shape[0] - 1

    def point(self, k: int) -> ParameterPoint:
        return ParameterPoint.from_array(self.names, self.points[k])

    def __iter__(self):
        return (self.point(k) for k in range(len(self.points)))

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Midpoints and displacement vectors of every segment, in path order."""
        n = self.steps
        if self.curve is not None and self.velocity is not None:
            t = (np.arange(n) + 0.5) / n
            return np.asarray(self.curve(t), float), np.asarray(self.velocity(t), float) / n
        p = self.points
        return 0.5 * (p[1:] + p[:-1]), p[1:] - p[:-1]

    def winding(self) -> int | None:
        """Net number of turns of the cyclic parameter, if the path declares one."""
        if self.cyclic is None or self.cyclic not in self.periods:
            return None
        i = self.names.index(self.cyclic)
        return int(round((self.points[-1, i] - self.points[0, i]) / self.periods[self.cyclic]))

    def resampled(self, steps: int) -> "ParamPath":
        """Same curve with a different step count (analytic or polyline paths)."""
        if self.curve is not None:
            t = np.linspace(0.0, 1.0, steps + 1)
            pts = np.asarray(self.curve(t), float)
            if self.closed and np.max(np.abs(pts[-1] - pts[0])) <= CLOSURE_TOL:
                pts[-1] = pts[0]  # exact return, as at construction
            return ParamPath(self.names, pts, self.closed, self.periods, self.curve, self.velocity, self.cyclic)
        return polyline(self.names, _corners(self.points), steps, closed=False, periods=self.periods)._with_closed(
            self.closed
        )

    def _with_closed(self, closed: bool) -> "ParamPath":
        return ParamPath(self.names, self.points, closed, self.periods, self.curve, self.velocity, self.cyclic)


def _corners(points: np.ndarray) -> np.ndarray:
    """Drop interior points that lie on straight runs."""
    keep = [0]
    for k in range(1, len(points) - 1):
        a, b = points[k] - points[keep[-1]], points[k + 1] - points[k]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0 or np.linalg.norm(a / na - b / nb) > 1e-12:
            keep.append(k)
    keep.append(len(points) - 1)
    return points[keep]


def sweep(
    base: ParameterPoint,
    param: str,
    span: float,
    steps: int,
    periods: Mapping[str, float] | None = None,
) -> ParamPath:
    """Vary one coordinate linearly by ``span`` with the rest held at ``base``.

    The path is closed when ``span`` is a whole number of periods of ``param``.
    """
    periods = dict(periods or {})
    i = base.index(param)
    start = base.as_array()

    def curve(t):
        t = np.atleast_1d(t)
        pts = np.repeat(start[None, :], len(t), axis=0)
        pts[:, i] += span * t
        return pts

    def velocity(t):
        v = np.zeros((len(np.atleast_1d(t)), len(start)))
        v[:, i] = span
        return v

    period = periods.get(param)
    closed = bool(period) and abs(math.remainder(span, period)) <= CLOSURE_TOL
    return ParamPath(
        base.names,
        curve(np.linspace(0.0, 1.0, steps + 1)),
        closed,
        periods,
        curve,
        velocity,
        cyclic=param if closed else None,
    )


def circle(
    names: Sequence[str],
    center: Sequence[float],
    radius: float,
    steps: int,
    start_angle: float = 0.0,
    turns: int = 1,
    base: ParameterPoint | None = None,
) -> ParamPath:
    """Counterclockwise circle in the plane of ``names[:2]`` (negative ``turns`` for clockwise)."""
    if radius <= 0:
        raise SchemaError("radius must be positive")
    if base is None:
        all_names = tuple(names)
        start = np.zeros(len(all_names))
    else:
        all_names = base.names
        start = base.as_array()
    ix, iy = (all_names.index(n) for n in names[:2])
    cx, cy = center
    sweep_angle = 2 * math.pi * turns

    def curve(t):
        t = np.atleast_1d(t)
        pts = np.repeat(start[None, :], len(t), axis=0)
        ang = start_angle + sweep_angle * t
        pts[:, ix] = cx + radius * np.cos(ang)
        pts[:, iy] = cy + radius * np.sin(ang)
        return pts

    def velocity(t):
        t = np.atleast_1d(t)
        v = np.zeros((len(t), len(start)))
        ang = start_angle + sweep_angle * t
        v[:, ix] = -radius * sweep_angle * np.sin(ang)
        v[:, iy] = radius * sweep_angle * np.cos(ang)
        return v

    pts = curve(np.linspace(0.0, 1.0, steps + 1))
    pts[-1] = pts[0]
    return ParamPath(all_names, pts, turns != 0, {}, curve, velocity)


def polyline(
    names: Sequence[str],
    waypoints,
    steps: int,
    closed: bool = False,
    periods: Mapping[str, float] | None = None,
) -> ParamPath:
    """Piecewise-linear path through ``waypoints``, refined to about ``steps`` segments.

    Every waypoint is kept; steps are shared out in proportion to segment length.
    """
    wp = np.asarray(waypoints, dtype=float)
    if wp.ndim != 2 or wp.shape[0] < 2:
        raise SchemaError("need at least two waypoints")
    lengths = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    nseg = len(lengths)
    if steps < nseg:
        raise SchemaError(f"steps={steps} is fewer than the {nseg} polyline segments")
    total = lengths.sum()
    if total == 0:
        counts = np.full(nseg, steps // nseg)
        counts[: steps - counts.sum()] += 1
    else:
        raw = lengths / total * steps
        counts = np.maximum(np.floor(raw).astype(int), 1)
        while counts.sum() < steps:
            counts[np.argmax(raw - counts)] += 1
        while counts.sum() > steps:
            counts[np.argmax(np.where(counts > 1, counts - raw, -np.inf))] -= 1
    pieces = []
    for k in range(nseg):
        s = np.linspace(0.0, 1.0, counts[k] + 1)[:-1, None]
        pieces.append(wp[k] + s * (wp[k + 1] - wp[k]))
    pieces.append(wp[-1:])
    return ParamPath(tuple(names), np.vstack(pieces), closed, dict(periods or {}))


def rectangle(
    names: Sequence[str],
    bounds: Sequence[Sequence[float]],
    steps: int,
    base: ParameterPoint | None = None,
    periods: Mapping[str, float] | None = None,
) -> ParamPath:
    """Rectangle loop ``(a1,a2) -> (b1,a2) -> (b1,b2) -> (a1,b2) -> (a1,a2)``.

    This is counterclockwise in the ``(names[0], names[1])`` plane when
    ``a < b`` on both axes. Other coordinates come from ``base``.
    """
    (a1, b1), (a2, b2) = bounds
    corners2 = [(a1, a2), (b1, a2), (b1, b2), (a1, b2), (a1, a2)]
    if base is None:
        all_names, start = tuple(names), np.zeros(2)
    else:
        all_names, start = base.names, base.as_array()
    i1, i2 = all_names.index(names[0]), all_names.index(names[1])
    wp = np.repeat(start[None, :], 5, axis=0)
    for k, (u, v) in enumerate(corners2):
        wp[k, i1], wp[k, i2] = u, v
    return polyline(all_names, wp, steps, closed=True, periods=periods)


@dataclass(frozen=True)
class SurfacePatch:
    """Rectangular region ``[a1,b1] x [a2,b2]`` in the plane of two parameters."""

    names: tuple[str, str]
    bounds: tuple[tuple[float, float], tuple[float, float]]
    cells: tuple[int, int]
    base: ParameterPoint | None = None

    def __post_init__(self):
        if len(self.names) != 2:
            raise SchemaError("a surface patch spans exactly two parameters")
        if min(self.cells) < 1:
            raise SchemaError("cell counts must be >= 1")
        if not np.all(np.isfinite(np.asarray(self.bounds, float))):
            raise SchemaError("non-finite patch bounds")

    def _all_names(self) -> tuple[str, ...]:
        return self.base.names if self.base is not None else tuple(self.names)

    def midpoints(self) -> tuple[list[ParameterPoint], float]:
        """Cell-centre points (row-major over the first parameter) and the cell area."""
        (a1, b1), (a2, b2) = self.bounds
        n1, n2 = self.cells
        h1, h2 = (b1 - a1) / n1, (b2 - a2) / n2
        u = a1 + (np.arange(n1) + 0.5) * h1
        v = a2 + (np.arange(n2) + 0.5) * h2
        names = self._all_names()
        start = self.base.as_array() if self.base is not None else np.zeros(2)
        i1, i2 = names.index(self.names[0]), names.index(self.names[1])
        pts = []
        for x in u:
            for y in v:
                c = start.copy()
                c[i1], c[i2] = x, y
                pts.append(ParameterPoint.from_array(names, c))
        return pts, h1 * h2

    def boundary(self, steps: int) -> ParamPath:
        return rectangle(self.names, self.bounds, steps, base=self.base)
