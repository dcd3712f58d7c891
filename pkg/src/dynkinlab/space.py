"""Metric measure spaces used by the simulators.

Three models are built in:

* :class:`Line` is the real line, optionally restricted to an open interval, with Lebesgue measure.
* :class:`Circle` is a circle of given circumference, with the arc-length metric and Lebesgue measure.
* :class:`Gasket` is the level-``L`` Sierpinski gasket graph. Its points are vertex indices, it carries the
  Euclidean metric of the unit-side embedding, and its measure is the uniform
  probability on vertices.

Points are plain floats (line, circle) or integer vertex indices (gasket).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ConfigError(ValueError):
    """Raised for inconsistent model, geometry or parameter choices."""


# ------------------------------------------------------------------ spaces


@dataclass(frozen=True)
class Line:
    """Real line, or the open interval ``(lo, hi)`` of it, with Lebesgue measure."""

    lo: float = -math.inf
    hi: float = math.inf
    kind: str = field(default="line", init=False)

    def dist(self, x, y):
        return np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def contains_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def ball_measure(self, x, r):
        # half-lengths on each side, so an unclipped ball measures exactly 2r
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        return np.maximum(np.minimum(r, x - self.lo) + np.minimum(r, self.hi - x), 0.0)

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    def sample_points(self, n: int, rng: np.random.Generator, span: float = 10.0) -> np.ndarray:
        lo = self.lo if math.isfinite(self.lo) else -span
        hi = self.hi if math.isfinite(self.hi) else span
        return rng.uniform(lo, hi, size=n)


@dataclass(frozen=True)
class Circle:
    """Circle of circumference ``length``; points are arc coordinates in ``[0, length)``."""

    length: float = 1.0
    kind: str = field(default="circle", init=False)

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigError("circle circumference must be positive")

    def wrap(self, x):
        return np.mod(np.asarray(x, dtype=float), self.length)

    def dist(self, x, y):
        d = np.mod(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)), self.length)
        return np.minimum(d, self.length - d)

    def contains_point(self, x) -> np.ndarray:
        return np.isfinite(np.asarray(x, dtype=float))

    def ball_measure(self, x, r):
        return np.minimum(2.0 * np.asarray(r, dtype=float) + 0.0 * np.asarray(x, dtype=float), self.length)

    @property
    def diameter(self) -> float:
        return self.length / 2.0

    def sample_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.0, self.length, size=n)


def _gasket_triangles(level: int) -> list[tuple[tuple[int, int], tuple[int, int], tuple[int, int]]]:
    n = 1 << level
    tris = [((0, 0), (n, 0), (0, n))]
    for _ in range(level):
        nxt = []
        for a, b, c in tris:
            ab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
            ac = ((a[0] + c[0]) // 2, (a[1] + c[1]) // 2)
            bc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
            nxt += [(a, ab, ac), (ab, b, bc), (ac, bc, c)]
        tris = nxt
    return tris


class Gasket:
    """Level-``L`` Sierpinski gasket graph embedded in the unit-side triangle.

    Vertices are stored as integer triangular coordinates ``(i, j)`` with
    ``i + j <= 2**L``; point ``(i, j)`` sits at ``(i + j/2, j*sqrt(3)/2) / 2**L``.
    Vertex 0 is the corner ``(0, 0)``, and the corners ``(2**L, 0)`` and ``(0, 2**L)``
    follow as vertices 1 and 2.
    """

    kind = "gasket"

    def __init__(self, level: int):
        if level < 0 or level > 10:
            raise ConfigError("gasket level must be in [0, 10]")
        self.level = int(level)
        n = 1 << level
        corners = [(0, 0), (n, 0), (0, n)]
        index: dict[tuple[int, int], int] = {c: i for i, c in enumerate(corners)}
        edges = set()
        for tri in _gasket_triangles(level):
            for v in tri:
                if v not in index:
                    index[v] = len(index)
            ids = [index[v] for v in tri]
            for p in range(3):
                a, b = ids[p], ids[(p + 1) % 3]
                edges.add((min(a, b), max(a, b)))
        self.coords = np.array(sorted(index, key=index.get), dtype=np.int64)
        nv = len(index)
        nbr: list[list[int]] = [[] for _ in range(nv)]
        for a, b in sorted(edges):
            nbr[a].append(b)
            nbr[b].append(a)
        self.degree = np.array([len(v) for v in nbr], dtype=np.int64)
        self.neighbors = np.full((nv, int(self.degree.max())), -1, dtype=np.int64)
        for v, lst in enumerate(nbr):
            self.neighbors[v, : len(lst)] = sorted(lst)
        xy = self.coords.astype(float)
        self.xy = np.column_stack([xy[:, 0] + 0.5 * xy[:, 1], xy[:, 1] * math.sqrt(3.0) / 2.0]) / n

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def edge_length(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def step_time(self) -> float:
        return 5.0 ** (-self.level)

    @property
    def diameter(self) -> float:
        return 1.0

    def vertex(self, i: int, j: int) -> int:
        hit = np.nonzero((self.coords[:, 0] == i) & (self.coords[:, 1] == j))[0]
        if hit.size == 0:
            raise ConfigError(f"({i}, {j}) is not a level-{self.level} gasket vertex")
        return int(hit[0])

    def dist(self, x, y):
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        d = self.xy[x] - self.xy[y]
        return np.hypot(d[..., 0], d[..., 1])

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        d = self.xy[:, None, :] - self.xy[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])

    def contains_point(self, x) -> np.ndarray:
        x = np.asarray(x)
        return (x >= 0) & (x < self.n_vertices)

    def ball_measure(self, x, r):
        x = np.asarray(x, dtype=np.int64)
        r = np.asarray(r, dtype=float)
        dm = self.distance_matrix[x]
        return np.sum(dm < r[..., None], axis=-1) / self.n_vertices

    def sample_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.n_vertices, size=n)


Space = Line | Circle | Gasket


# -------------------------------------------------------------- open sets

SET_KINDS = ("ball", "interval", "vertex_set", "whole")


@dataclass(frozen=True)
class OpenSetSpec:
    """A subset of a model space.

    ``kind`` is ``"ball"`` (``center``, ``radius``), ``"interval"`` (``lo``,
    ``hi``; line coordinates, or arc coordinates on the circle), ``"vertex_set"``
    (``vertices``) or ``"whole"``. ``closed=True`` turns a ball or interval
    into its closure, which is how target sets such as ``[-1/2, 1/2]`` are
    described.
    """

    kind: str
    center: float = 0.0
    radius: float = 0.0
    lo: float = -math.inf
    hi: float = math.inf
    vertices: frozenset[int] = frozenset()
    closed: bool = False

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ConfigError(f"unknown set kind {self.kind!r}; expected one of {SET_KINDS}")
        if self.kind == "ball" and not self.radius > 0:
            raise ConfigError("ball radius must be positive")
        if self.kind == "interval" and not self.lo < self.hi:
            raise ConfigError("interval needs lo < hi")

    @classmethod
    def ball(cls, center: float, radius: float) -> OpenSetSpec:
        return cls("ball", center=center, radius=radius)

    @classmethod
    def interval(cls, lo: float, hi: float, closed: bool = False) -> OpenSetSpec:
        return cls("interval", lo=lo, hi=hi, closed=closed)

    @classmethod
    def whole(cls) -> OpenSetSpec:
        return cls("whole")

    @classmethod
    def vertex_set(cls, vertices) -> OpenSetSpec:
        return cls("vertex_set", vertices=frozenset(int(v) for v in vertices))

    def bounds(self, space: Space) -> tuple[float, float]:
        """Interval end points for 1D kinds (ball turned into an interval)."""
        if self.kind == "whole":
            return -math.inf, math.inf
        if self.kind == "interval":
            return self.lo, self.hi
        if self.kind == "ball":
            return self.center - self.radius, self.center + self.radius
        raise ConfigError("vertex sets have no interval bounds")

    def contains(self, space: Space, x) -> np.ndarray:
        """Vectorized membership; NaN (the cemetery) is never a member."""
        if self.kind == "whole":
            return np.asarray(space.contains_point(x), dtype=bool) & _not_cemetery(space, x)
        if isinstance(space, Gasket):
            x = np.asarray(x, dtype=np.int64)
            ok = (x >= 0) & (x < space.n_vertices)
            xs = np.where(ok, x, 0)
            if self.kind == "vertex_set":
                member = np.isin(xs, np.fromiter(self.vertices, dtype=np.int64, count=len(self.vertices)))
            elif self.kind == "ball":
                center = int(self.center)
                d = space.dist(xs, center)
                member = d <= self.radius if self.closed else d < self.radius
            else:
                raise ConfigError("interval sets are not defined on the gasket")
            return ok & member
        x = np.asarray(x, dtype=float)
        if self.kind == "vertex_set":
            raise ConfigError("vertex sets are only defined on the gasket")
        if isinstance(space, Circle):
            if self.kind == "ball":
                d = space.dist(x, self.center)
                m = d <= self.radius if self.closed else d < self.radius
            else:
                off = np.mod(x - self.lo, space.length)
                width = self.hi - self.lo
                m = (off <= width) if self.closed else ((off > 0) & (off < width))
                if width >= space.length:
                    m = np.ones_like(off, dtype=bool)
            return m & np.isfinite(x)
        lo, hi = self.bounds(space)
        if self.closed:
            return (x >= lo) & (x <= hi)
        return (x > lo) & (x < hi)

    def dist_to_complement(self, space: Space, x) -> np.ndarray:
        """``inf{d(x, y) : y not in the set}``; ``inf`` of the empty set is ``inf``."""
        if self.kind == "whole":
            return np.full(np.shape(x), math.inf)
        if isinstance(space, Gasket):
            x = np.asarray(x, dtype=np.int64)
            member = self.contains(space, np.arange(space.n_vertices))
            if member.all():
                return np.full(x.shape, math.inf)
            dm = space.distance_matrix[np.atleast_1d(x)][:, ~member]
            return dm.min(axis=1).reshape(x.shape)
        x = np.asarray(x, dtype=float)
        if isinstance(space, Circle):
            if self.kind == "ball":
                if self.radius > space.length / 2.0:
                    return np.full(x.shape, math.inf)
                return np.maximum(self.radius - space.dist(x, self.center), 0.0)
            width = self.hi - self.lo
            if width >= space.length:
                return np.full(x.shape, math.inf)
            off = np.mod(x - self.lo, space.length)
            inside = (off > 0) & (off < width)
            return np.where(inside, np.minimum(off, width - off), 0.0)
        lo, hi = self.bounds(space)
        # clip to the ambient interval of a restricted line: points outside
        # the state space do not count as complement points
        lo_gap = x - lo if lo > space.lo else math.inf
        hi_gap = hi - x if hi < space.hi else math.inf
        inside = (x > lo) & (x < hi)
        return np.where(inside, np.minimum(lo_gap, hi_gap), 0.0)

    def closure_inside(self, space: Space, other: OpenSetSpec) -> bool:
        """Whether the closure of this set lies inside the open set ``other``."""
        if other.kind == "whole":
            return True
        if isinstance(space, Gasket):
            # finite vertex sets are closed
            mine = self.contains(space, np.arange(space.n_vertices))
            theirs = other.contains(space, np.arange(space.n_vertices))
            return bool(np.all(~mine | theirs))
        if self.kind == "whole":
            return False
        if isinstance(space, Circle):
            if self.kind == "ball" and other.kind == "ball":
                return space.dist(self.center, other.center) + self.radius < other.radius
            lo, hi = self.bounds(space)
            grid = np.linspace(lo, hi, 4097)
            return bool(np.all(other.contains(space, grid)))
        lo, hi = self.bounds(space)
        olo, ohi = other.bounds(space)
        return olo < lo and hi < ohi


def _not_cemetery(space: Space, x) -> np.ndarray:
    if isinstance(space, Gasket):
        return np.asarray(x) >= 0
    return np.isfinite(np.asarray(x, dtype=float))


# -------------------------------------------------------------- operations


def ball_membership(space: Space, center, r: float, x) -> np.ndarray | bool:
    """``d(center, x) < r`` (strict)."""
    if not r > 0:
        raise ConfigError("ball radius must be positive")
    out = space.dist(center, x) < r
    return bool(out) if np.ndim(out) == 0 else out


def inner_set_membership(space: Space, open_set: OpenSetSpec, epsilon: float, R: float, x):
    """Whether the distance from ``x`` to the complement of ``open_set`` exceeds ``epsilon * R``."""
    if not 0 < epsilon < 1:
        raise ConfigError("epsilon must lie in (0, 1)")
    if not R > 0:
        raise ConfigError("R must be positive")
    out = open_set.dist_to_complement(space, x) > epsilon * R
    return bool(out) if np.ndim(out) == 0 else out


@dataclass
class DoublingReport:
    estimate: float
    worst_center: float
    worst_radius: float
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def volume_doubling_report(space: Space, centers, radii, R_max: float) -> DoublingReport:
    """Largest observed ``mu(B(x, 2r)) / mu(B(x, r))`` over the sample.

    Zero or non-finite ball measures are recorded as violations.
    """
    centers = np.asarray(centers)
    radii = np.asarray(radii, dtype=float)
    if centers.size == 0 or radii.size == 0:
        raise ConfigError("empty doubling sample")
    if np.any(radii >= R_max) or np.any(radii <= 0):
        raise ConfigError("radii must lie in (0, R_max)")
    cc, rr = np.meshgrid(centers, radii, indexing="ij")
    small = space.ball_measure(cc, rr)
    big = space.ball_measure(cc, 2.0 * rr)
    violations = []
    bad = ~(small > 0) | ~np.isfinite(big)
    for i, j in zip(*np.nonzero(bad)):
        violations.append(f"ball at {cc[i, j]} radius {rr[i, j]} has measure {small[i, j]}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bad, -np.inf, big / small)
    k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return DoublingReport(float(ratio[k]), float(cc[k]), float(rr[k]), violations)
