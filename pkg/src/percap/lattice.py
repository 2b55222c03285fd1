"""Geometry of Z^d: adjacency, boxes, regions and boundary patches.

Points are plain tuples of Python ints. Regions are small immutable
descriptions with a pure membership test; they are also encoded into flat
integer arrays so the compiled exploration kernels can evaluate them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

Point = tuple[int, ...]

COORD_LIMIT = 2**40

# Spread-out adjacency uses the sup norm: y ~ x iff 0 < ||y - x||_inf <= rho.
SPREAD_OUT_NORM = "linf"

NEAREST_NEIGHBOR = "nn"
SPREAD_OUT = "spread"


def as_point(x: Iterable[int], d: int | None = None) -> Point:
    pt = tuple(int(c) for c in x)
    if d is not None and len(pt) != d:
        raise ValueError(f"point {pt} has length {len(pt)}, expected dimension {d}")
    for c in pt:
        if abs(c) > COORD_LIMIT:
            raise ValueError(f"coordinate {c} exceeds the +-2^40 cap")
    return pt


def origin(d: int) -> Point:
    return (0,) * d


def unit(d: int, axis: int, length: int = 1) -> Point:
    v = [0] * d
    v[axis] = length
    return tuple(v)


def add(x: Sequence[int], y: Sequence[int]) -> Point:
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Sequence[int], y: Sequence[int]) -> Point:
    return tuple(a - b for a, b in zip(x, y))


def linf(x: Sequence[int], y: Sequence[int] | None = None) -> int:
    if y is None:
        return max((abs(a) for a in x), default=0)
    return max((abs(a - b) for a, b in zip(x, y)), default=0)


def euclid(x: Sequence[int], y: Sequence[int] | None = None) -> float:
    if y is None:
        return float(np.sqrt(sum(a * a for a in x)))
    return float(np.sqrt(sum((a - b) ** 2 for a, b in zip(x, y))))


@dataclass(frozen=True)
class GraphSpec:
    """Lattice model: dimension, connectivity rule and bond-open probability."""

    dimension: int
    p: float
    connectivity: str = NEAREST_NEIGHBOR
    rho: int = 1

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.connectivity not in (NEAREST_NEIGHBOR, SPREAD_OUT):
            raise ValueError(f"unknown connectivity {self.connectivity!r}")
        if self.connectivity == SPREAD_OUT and self.rho < 1:
            raise ValueError("spread-out range must be >= 1")

    @classmethod
    def nearest_neighbor(cls, d: int, p: float) -> "GraphSpec":
        return cls(d, p)

    @classmethod
    def spread_out(cls, d: int, rho: int, p: float) -> "GraphSpec":
        return cls(d, p, SPREAD_OUT, rho)

    @property
    def reach(self) -> int:
        """Largest sup-norm length of a single edge."""
        return 1 if self.connectivity == NEAREST_NEIGHBOR else self.rho

    @property
    def degree(self) -> int:
        if self.connectivity == NEAREST_NEIGHBOR:
            return 2 * self.dimension
        return (2 * self.rho + 1) ** self.dimension - 1

    def with_p(self, p: float) -> "GraphSpec":
        return GraphSpec(self.dimension, p, self.connectivity, self.rho)


@lru_cache(maxsize=32)
def _offsets(d: int, connectivity: str, rho: int) -> np.ndarray:
    if connectivity == NEAREST_NEIGHBOR:
        rows = []
        for i in range(d):
            for s in (-1, 1):
                v = [0] * d
                v[i] = s
                rows.append(v)
        arr = np.array(sorted(rows), dtype=np.int64).reshape(-1, d)
    else:
        axis = np.arange(-rho, rho + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        arr = np.stack([g.ravel() for g in grids], axis=1)
        # meshgrid in 'ij' order already enumerates lexicographically
        arr = arr[np.any(arr != 0, axis=1)]
    arr.setflags(write=False)
    return arr


def offsets(spec: GraphSpec) -> np.ndarray:
    """Neighbour offsets of the model, in lexicographic order (read-only)."""
    return _offsets(spec.dimension, spec.connectivity, spec.rho)


def neighbors(x: Sequence[int], spec: GraphSpec) -> list[Point]:
    x = as_point(x, spec.dimension)
    base = np.asarray(x, dtype=np.int64)
    return [tuple(int(c) for c in row) for row in base + offsets(spec)]


def adjacent(x: Sequence[int], y: Sequence[int], spec: GraphSpec) -> bool:
    diff = [a - b for a, b in zip(x, y)]
    if not any(diff):
        return False
    if spec.connectivity == NEAREST_NEIGHBOR:
        return sum(abs(c) for c in diff) == 1
    return max(abs(c) for c in diff) <= spec.rho


@dataclass(frozen=True, order=True)
class Edge:
    """Undirected edge stored with the lexicographically smaller endpoint first."""

    a: Point
    b: Point

    @classmethod
    def canonical(cls, x: Sequence[int], y: Sequence[int]) -> "Edge":
        x, y = as_point(x), as_point(y)
        if x == y:
            raise ValueError("an edge needs two distinct endpoints")
        return cls(x, y) if x < y else cls(y, x)


# -- regions -----------------------------------------------------------------

FULL, BOX, BOX_COMPLEMENT, HALF_SPACE, ANNULUS = range(5)
# {z : z[axis] <= threshold}; only produced by hyperplane_region
UPPER_HALF_SPACE = 5
_KIND_NAMES = {
    FULL: "full",
    BOX: "box",
    BOX_COMPLEMENT: "box_complement",
    HALF_SPACE: "half_space",
    ANNULUS: "annulus",
    UPPER_HALF_SPACE: "upper_half_space",
}


@dataclass(frozen=True)
class Region:
    """A subset of Z^d described by one primitive shape.

    Box(c, r) is {z : ||z-c||_inf <= r}; BoxComplement its complement;
    HalfSpace(axis, t) is {z : z[axis] >= t}; Annulus(c, inner, outer) is
    {z : inner < ||z-c||_inf <= outer}, so B(c,outer) minus B(c,inner).
    Use :meth:`intersect` for conjunctions.
    """

    kind: int = FULL
    center: Point = ()
    a: int = 0
    b: int = 0
    parts: tuple["Region", ...] = field(default=(), compare=True)

    @classmethod
    def full(cls) -> "Region":
        return cls(FULL)

    @classmethod
    def box(cls, center: Sequence[int], radius: int) -> "Region":
        if radius < 0:
            raise ValueError("box radius must be >= 0")
        return cls(BOX, as_point(center), int(radius))

    @classmethod
    def box_complement(cls, center: Sequence[int], radius: int) -> "Region":
        return cls(BOX_COMPLEMENT, as_point(center), int(radius))

    @classmethod
    def half_space(cls, axis: int, threshold: int = 0) -> "Region":
        return cls(HALF_SPACE, (), int(axis), int(threshold))

    @classmethod
    def annulus(cls, center: Sequence[int], inner: int, outer: int) -> "Region":
        if not inner < outer:
            raise ValueError("annulus needs inner < outer")
        return cls(ANNULUS, as_point(center), int(inner), int(outer))

    def intersect(self, other: "Region") -> "Region":
        mine = self.parts if self.parts else (self,)
        theirs = other.parts if other.parts else (other,)
        prims = tuple(r for r in mine + theirs if r.kind != FULL)
        if not prims:
            return Region.full()
        if len(prims) == 1:
            return prims[0]
        return Region(FULL, parts=prims)

    @property
    def primitives(self) -> tuple["Region", ...]:
        if self.parts:
            return self.parts
        return () if self.kind == FULL else (self,)

    @property
    def is_box(self) -> bool:
        return not self.parts and self.kind == BOX

    def contains(self, x: Sequence[int]) -> bool:
        for r in self.primitives:
            if not _prim_contains(r, x):
                return False
        return True

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64)
        keep = np.ones(len(pts), dtype=bool)
        for r in self.primitives:
            if r.kind == HALF_SPACE:
                keep &= pts[:, r.a] >= r.b
                continue
            if r.kind == UPPER_HALF_SPACE:
                keep &= pts[:, r.a] <= r.b
                continue
            dist = np.abs(pts - np.asarray(r.center, dtype=np.int64)).max(axis=1)
            if r.kind == BOX:
                keep &= dist <= r.a
            elif r.kind == BOX_COMPLEMENT:
                keep &= dist > r.a
            else:
                keep &= (dist > r.a) & (dist <= r.b)
        return keep

    def encode(self, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flat arrays (kinds, centers, a, b) for the compiled kernels."""
        prims = self.primitives
        kinds = np.array([r.kind for r in prims], dtype=np.int64)
        centers = np.zeros((len(prims), d), dtype=np.int64)
        for i, r in enumerate(prims):
            if r.center:
                centers[i] = as_point(r.center, d)
        a = np.array([r.a for r in prims], dtype=np.int64)
        b = np.array([r.b for r in prims], dtype=np.int64)
        return kinds, centers, a, b

    def to_dict(self) -> dict:
        if self.parts:
            return {"kind": "intersection", "parts": [r.to_dict() for r in self.parts]}
        out = {"kind": _KIND_NAMES[self.kind]}
        if self.kind in (BOX, BOX_COMPLEMENT):
            out.update(center=list(self.center), radius=self.a)
        elif self.kind in (HALF_SPACE, UPPER_HALF_SPACE):
            out.update(axis=self.a, threshold=self.b)
        elif self.kind == ANNULUS:
            out.update(center=list(self.center), inner=self.a, outer=self.b)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Region":
        kind = data["kind"]
        if kind == "full":
            return cls.full()
        if kind == "box":
            return cls.box(data["center"], data["radius"])
        if kind == "box_complement":
            return cls.box_complement(data["center"], data["radius"])
        if kind == "half_space":
            return cls.half_space(data["axis"], data.get("threshold", 0))
        if kind == "annulus":
            return cls.annulus(data["center"], data["inner"], data["outer"])
        if kind == "upper_half_space":
            return cls(UPPER_HALF_SPACE, (), int(data["axis"]), int(data.get("threshold", 0)))
        if kind == "intersection":
            out = cls.full()
            for part in data["parts"]:
                out = out.intersect(cls.from_dict(part))
            return out
        raise ValueError(f"unknown region kind {kind!r}")


def _prim_contains(r: Region, x: Sequence[int]) -> bool:
    if r.kind == FULL:
        return True
    if r.kind == HALF_SPACE:
        return x[r.a] >= r.b
    if r.kind == UPPER_HALF_SPACE:
        return x[r.a] <= r.b
    dist = linf(x, r.center)
    if r.kind == BOX:
        return dist <= r.a
    if r.kind == BOX_COMPLEMENT:
        return dist > r.a
    return r.a < dist <= r.b


def is_inner_boundary(x: Sequence[int], region: Region, spec: GraphSpec) -> bool:
    """True iff x lies in ``region`` and has a neighbour outside it."""
    x = as_point(x, spec.dimension)
    if not region.contains(x):
        raise ValueError(f"{x} is not in the region")
    if region.is_box:
        return linf(x, region.center) > region.a - spec.reach
    nbrs = np.asarray(x, dtype=np.int64) + offsets(spec)
    return not bool(region.contains_many(nbrs).all())


def box_points(center: Sequence[int], radius: int) -> np.ndarray:
    """All points of B(center, radius) as an (n, d) int64 array, lexicographic."""
    center = np.asarray(center, dtype=np.int64)
    axis = np.arange(-radius, radius + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * len(center)), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1) + center


def inner_boundary_region(box: Region, spec: GraphSpec) -> Region:
    """The inner boundary of a box as an annulus (points within reach of the outside)."""
    if not box.is_box:
        raise ValueError("inner_boundary_region needs a Box region")
    inner = box.a - spec.reach
    if inner < 0:
        return box
    return Region.annulus(box.center, inner, box.a)


def hyperplane_region(axis: int, threshold: int = 0, thickness: int = 1) -> Region:
    """Slab {threshold <= z[axis] < threshold + thickness} as a region.

    thickness=1 is the thin hyperplane; thickness=rho the spread-out inner
    boundary of the half space.
    """
    return Region.half_space(axis, threshold).intersect(
        Region(UPPER_HALF_SPACE, (), int(axis), int(threshold + thickness - 1))
    )


def surface_patch_region(
    x: Sequence[int], s: int, region: Region, spec: GraphSpec, thick: bool = False
) -> Region:
    """Q_s(x) as a membership predicate rather than an enumerated set.

    In high dimension the patch has (2s+1)^(d-1) points, so kernels test
    membership instead of storing it.
    """
    ball = Region.box(x, s)
    if region.is_box:
        return ball.intersect(inner_boundary_region(region, spec))
    if not region.parts and region.kind == HALF_SPACE:
        width = spec.reach if thick else 1
        return ball.intersect(hyperplane_region(region.a, region.b, width))
    raise ValueError("surface patches are defined for Box and HalfSpace regions")


def surface_patch(
    x: Sequence[int], s: int, region: Region, spec: GraphSpec, thick: bool = False
) -> set[Point]:
    """Enumerate Q_s(x): points of B(x,s) on the inner boundary of ``region``.

    For a HalfSpace region the thin hyperplane {z[axis] == threshold} is used
    unless ``thick`` is set, in which case the spread-out inner boundary is.
    """
    x = as_point(x, spec.dimension)
    if s < 0:
        raise ValueError("s must be >= 0")
    if region.is_box:
        if not is_inner_boundary(x, region, spec):
            raise ValueError(f"{x} is not on the inner boundary of the box")
        lo = [max(xi - s, ci - region.a) for xi, ci in zip(x, region.center)]
        hi = [min(xi + s, ci + region.a) for xi, ci in zip(x, region.center)]
        out = set()
        for y in itertools.product(*(range(l, h + 1) for l, h in zip(lo, hi))):
            if linf(y, region.center) > region.a - spec.reach:
                out.add(tuple(y))
        return out
    if not region.parts and region.kind == HALF_SPACE:
        axis, t = region.a, region.b
        width = spec.reach if thick else 1
        if not t <= x[axis] < t + width:
            raise ValueError(f"{x} is not on the boundary of the half space")
        ranges = []
        for i, xi in enumerate(x):
            if i == axis:
                ranges.append(range(max(xi - s, t), min(xi + s, t + width - 1) + 1))
            else:
                ranges.append(range(xi - s, xi + s + 1))
        return {tuple(y) for y in itertools.product(*ranges)}
    raise ValueError("surface patches are defined for Box and HalfSpace regions")
