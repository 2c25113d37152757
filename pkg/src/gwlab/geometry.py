"""Metric spaces the walk moves on: one line, two intersecting lines, or two
parallel lines.

A site is addressed by its signed arc-length abscissa `u` along a line plus a
line label.  For intersecting lines both abscissas are measured from the
intersection point, which is the origin of both.  For parallel lines the
abscissa is the first coordinate (the "shadow") of the point.  All distances
are Euclidean in the plane embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

SINGLE_LINE = "single-line"
INTERSECTING = "intersecting"
PARALLEL = "parallel"

_KINDS = (SINGLE_LINE, INTERSECTING, PARALLEL)


@dataclass(frozen=True)
class Space:
    """Geometry descriptor plus the simulation window half-width.

    Args:
        kind: one of SINGLE_LINE, INTERSECTING, PARALLEL.
        window_L: half-width of the simulated abscissa window, > 0.
        alpha: angle between the lines in (0, pi); intersecting only.
        separation_r: distance between the lines, > 0; parallel only.
    """

    kind: str
    window_L: float
    alpha: float | None = None
    separation_r: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown space kind: {self.kind!r}")
        if not self.window_L > 0:
            raise ValidationError("window_L must be positive")
        if self.kind == INTERSECTING:
            if self.alpha is None or not 0.0 < self.alpha < math.pi:
                raise ValidationError("intersecting lines need alpha in (0, pi)")
        elif self.alpha is not None:
            raise ValidationError("alpha only applies to intersecting lines")
        if self.kind == PARALLEL:
            if self.separation_r is None or not self.separation_r > 0:
                raise ValidationError("parallel lines need separation_r > 0")
        elif self.separation_r is not None:
            raise ValidationError("separation_r only applies to parallel lines")

    @property
    def n_lines(self) -> int:
        return 1 if self.kind == SINGLE_LINE else 2


@dataclass(frozen=True)
class Site:
    """A location on the space: signed abscissa `u` on line `line` (0 or 1).

    Line 1 is the second line (the "line r" of a parallel pair).  The walk's
    default start Site(0.0, 0) is the origin; for intersecting lines that is
    the intersection point itself.
    """

    u: float
    line: int = 0


def angle_from_slopes(m1: float, m2: float) -> float:
    """Acute angle between the lines y = m1*x and y = m2*x through the origin."""
    if m1 == m2:
        raise ValidationError("slopes must differ (distinct lines)")
    a = abs(math.atan(m1) - math.atan(m2))
    if a > math.pi / 2:
        a = math.pi - a
    return a


def distance(space: Space, a: Site, b: Site) -> float:
    """Euclidean distance between two sites of the space.

    Same line: |a.u - b.u|.  Parallel cross-line: hypot of the abscissa gap
    and the separation.  Intersecting cross-line: law of cosines on the two
    arms, with signed abscissas (so opposite half-lines come out right).
    """
    if a.line == b.line:
        return abs(a.u - b.u)
    if space.kind == PARALLEL:
        du = a.u - b.u
        r = space.separation_r
        return math.sqrt(du * du + r * r)
    if space.kind == INTERSECTING:
        ca = math.cos(space.alpha)
        return math.sqrt(a.u * a.u + b.u * b.u - 2.0 * a.u * b.u * ca)
    raise ValidationError("single-line space has no second line")


def norm(space: Space, a: Site) -> float:
    """Distance from the origin used by the record machinery: |a.u|.

    For single and intersecting lines this is the arc distance to the origin.
    For parallel lines the convention is the shadow distance |u|, ignoring
    the offset of line 1.
    """
    return abs(a.u)


def boundary_margin(space: Space, a: Site) -> float:
    """Minimum possible distance from `a` to any location outside the window.

    The window is |u| <= window_L on every line of the space.  For a single
    line and for parallel lines the nearest outside location is on the site's
    own line, so the margin is min(L - u, L + u).  For intersecting lines the
    minimum over each line's outside region is attained at one of the four
    edge sites with abscissa +-L, so those are enumerated.
    """
    L = space.window_L
    if space.kind == INTERSECTING:
        m = min(L - a.u, L + a.u)
        for e in (-L, L):
            d = distance(space, a, Site(e, 1 - a.line))
            if d < m:
                m = d
        return m
    return min(L - a.u, L + a.u)
