"""Seed-deterministic bond configurations and budgeted cluster exploration."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .lattice import (
    Edge,
    GraphSpec,
    Point,
    Region,
    adjacent,
    as_point,
    inner_boundary_region,
    linf,
    offsets,
)

DEFAULT_BUDGET = 10**6

# Denominator streams use replica_index + DENOMINATOR_OFFSET.
DENOMINATOR_OFFSET = 2**31

_MASK64 = (1 << 64) - 1


class Verdict:
    DISCONNECTED = K.DISCONNECTED
    CONNECTED = K.CONNECTED
    TRUNCATED = K.TRUNCATED


@dataclass(frozen=True)
class ConnectivityVerdict:
    """Three-valued answer of a budgeted connectivity query."""

    status: int
    witness: Point | None = None

    @property
    def connected(self) -> bool:
        return self.status == K.CONNECTED

    @property
    def truncated(self) -> bool:
        return self.status == K.TRUNCATED

    def __repr__(self) -> str:
        name = {0: "Disconnected", 1: "Connected", 2: "Truncated"}[self.status]
        return f"{name}({self.witness})" if self.witness is not None else f"{name}()"


class KernelModel:
    """Arrays a GraphSpec compiles down to for the kernels."""

    def __init__(self, spec: GraphSpec):
        self.spec = spec
        self.d = spec.dimension
        if self.d > K.MAX_DIM:
            raise ValueError(f"dimension above {K.MAX_DIM} not supported")
        self.offs = np.ascontiguousarray(offsets(spec))
        self.mult = K.AXIS_MULT[: self.d].copy()
        self.off_lin = K.offset_lins(self.offs, self.mult)
        self.codes, self.positive = K.offset_codes(self.offs)
        self.thr = np.uint64(int(np.ceil(spec.p * 2.0**53)))

    def args(self):
        return self.thr, self.offs, self.off_lin, self.codes, self.positive, self.mult


@lru_cache(maxsize=64)
def kernel_model(spec: GraphSpec) -> KernelModel:
    return KernelModel(spec)


def seed64(seed: int) -> np.uint64:
    return np.uint64(int(seed) & _MASK64)


@dataclass
class Configuration:
    """A lazily revealed percolation configuration.

    Edge states are a pure keyed hash of (master_seed, replica_index, edge),
    so nothing needs to be stored: the configuration is its key.
    """

    spec: GraphSpec
    master_seed: int
    replica_index: int = 0
    _keys: tuple = field(init=False, repr=False)

    def __post_init__(self):
        k1, k2 = K.stream_key(seed64(self.master_seed), int(self.replica_index), K.TAG_EDGE)
        self._keys = (np.uint64(k1), np.uint64(k2))

    @property
    def keys(self):
        return self._keys

    @property
    def model(self) -> KernelModel:
        return kernel_model(self.spec)

    def replica(self, index: int) -> "Configuration":
        return Configuration(self.spec, self.master_seed, index)


def edge_state(cfg: Configuration, e: Edge | tuple) -> bool:
    """True when the edge is open in ``cfg``."""
    if not isinstance(e, Edge):
        e = Edge.canonical(*e)
    if not adjacent(e.a, e.b, cfg.spec):
        raise ValueError(f"{e} is not an edge of the graph")
    model = cfg.model
    k1, k2 = cfg.keys
    return bool(
        K.edge_open(
            np.asarray(e.a, dtype=np.int64),
            np.asarray(e.b, dtype=np.int64),
            k1, k2, model.thr, model.mult,
        )
    )


@dataclass
class Cluster:
    """Explored component of ``origin`` inside ``region``."""

    origin: Point
    region: Region
    vertices: set[Point]
    open_edges: set[Edge]
    truncated: bool
    budget_used: int
    order: list[Point] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, x) -> bool:
        return tuple(x) in self.vertices

    def to_text(self) -> str:
        """One vertex per line, coordinates separated by spaces."""
        return "".join(" ".join(str(c) for c in v) + "\n" for v in sorted(self.vertices))

    @staticmethod
    def vertices_from_text(text: str) -> set[Point]:
        return {tuple(int(c) for c in line.split()) for line in text.splitlines() if line.strip()}


def _points_array(pts: Iterable[Sequence[int]], d: int) -> np.ndarray:
    rows = [as_point(p, d) for p in pts]
    if not rows:
        return np.empty((0, d), dtype=np.int64)
    return np.array(rows, dtype=np.int64).reshape(len(rows), d)


def _no_region(d: int):
    return (
        np.empty(0, dtype=np.int64),
        np.empty((0, d), dtype=np.int64),
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64),
    )


def _run_once(cfg, seeds, region, target_pts, target_region, stop_on_hit, budget):
    model = cfg.model
    d = model.d
    rk, rc, ra, rb = region.encode(d)
    if target_region is None:
        tk, tc, ta, tb = _no_region(d)
        use_tr = False
    else:
        tk, tc, ta, tb = target_region.encode(d)
        use_tr = True
    k1, k2 = cfg.keys
    return K.explore_once(
        k1, k2, *model.args(), seeds, rk, rc, ra, rb, tk, tc, ta, tb, use_tr,
        target_pts, bool(stop_on_hit), int(budget),
    )


def explore(cfg: Configuration, x: Sequence[int], region: Region | None = None,
            budget: int = DEFAULT_BUDGET) -> Cluster:
    """Breadth-first exploration of C(x; region) admitting at most ``budget`` vertices.

    ``truncated`` is set exactly when the component has more than ``budget``
    vertices.
    """
    region = Region.full() if region is None else region
    d = cfg.spec.dimension
    x = as_point(x, d)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not region.contains(x):
        raise ValueError(f"{x} is not in the region")
    seeds = np.array([x], dtype=np.int64)
    status, _, _, _, pts = _run_once(
        cfg, seeds, region, np.empty((0, d), dtype=np.int64), None, False, budget
    )
    order = [tuple(int(c) for c in row) for row in pts]
    k1, k2 = cfg.keys
    model = cfg.model
    ia, ib = K.open_edges_within(pts, k1, k2, *model.args())
    edges = {Edge(order[i], order[j]) for i, j in zip(ia.tolist(), ib.tolist())}
    return Cluster(
        origin=x,
        region=region,
        vertices=set(order),
        open_edges=edges,
        truncated=status == K.TRUNCATED,
        budget_used=len(order),
        order=order,
    )


def connects(cfg: Configuration, x: Sequence[int], target: Iterable[Sequence[int]],
             region: Region | None = None, budget: int = DEFAULT_BUDGET) -> ConnectivityVerdict:
    """Is x joined to ``target`` by an open path inside ``region``?

    Stops at the first target vertex reached. An empty target is
    Disconnected.
    """
    region = Region.full() if region is None else region
    d = cfg.spec.dimension
    x = as_point(x, d)
    if not region.contains(x):
        raise ValueError(f"{x} is not in the region")
    tpts = _points_array(target, d)
    if len(tpts) == 0:
        return ConnectivityVerdict(K.DISCONNECTED)
    status, _, hit_index, _, _ = _run_once(
        cfg, np.array([x], dtype=np.int64), region, tpts, None, True, budget
    )
    if status == K.CONNECTED:
        return ConnectivityVerdict(K.CONNECTED, tuple(int(c) for c in tpts[hit_index]))
    return ConnectivityVerdict(int(status))


def pioneers(cluster: Cluster, spec: GraphSpec) -> set[Point]:
    """Cluster vertices on the inner boundary of the cluster's box region."""
    if not cluster.region.is_box:
        raise ValueError("pioneers need a cluster explored inside a Box")
    c, r = cluster.region.center, cluster.region.a
    cut = r - spec.reach
    return {v for v in cluster.vertices if linf(v, c) > cut}


@dataclass(frozen=True)
class AnnulusCount:
    count: int
    truncated: bool


def annulus_count(cfg: Configuration, z: Sequence[int], center: Sequence[int], r: int, L: int,
                  budget: int = DEFAULT_BUDGET, outward: bool = False) -> AnnulusCount:
    """Number of vertices of C(z) in the annulus B(c,r) minus B(c,r-L).

    With ``outward`` the annulus is B(c,r+L) minus B(c,r) instead.
    """
    if not 0 < L < r:
        raise ValueError("need 0 < L < r")
    d = cfg.spec.dimension
    z = as_point(z, d)
    ring = Region.annulus(center, r, r + L) if outward else Region.annulus(center, r - L, r)
    status, _, _, n_target, _ = _run_once(
        cfg, np.array([z], dtype=np.int64), Region.full(),
        np.empty((0, d), dtype=np.int64), ring, False, budget,
    )
    return AnnulusCount(int(n_target), status == K.TRUNCATED)


# -- batched replica runs ----------------------------------------------------------


def run_explore_batch(spec: GraphSpec, seed: int, replica0: int, n: int, seeds: np.ndarray,
                      region: Region, target_pts: np.ndarray | None = None,
                      target_region: Region | None = None, stop_on_hit: bool = True,
                      budget: int = DEFAULT_BUDGET, reverse: bool = False):
    """Per-replica (status, size, hit index, target count) for replicas
    replica0 .. replica0+n-1.

    ``reverse`` retries truncated point-set queries from the target side.
    """
    model = kernel_model(spec)
    d = model.d
    rk, rc, ra, rb = region.encode(d)
    if target_region is None:
        tk, tc, ta, tb = _no_region(d)
        use_tr = False
    else:
        tk, tc, ta, tb = target_region.encode(d)
        use_tr = True
    if target_pts is None:
        target_pts = np.empty((0, d), dtype=np.int64)
    return K.batch_explore(
        seed64(seed), int(replica0), int(n), K.TAG_EDGE, *model.args(),
        np.ascontiguousarray(seeds, dtype=np.int64), rk, rc, ra, rb, tk, tc, ta, tb, use_tr,
        np.ascontiguousarray(target_pts, dtype=np.int64), bool(stop_on_hit), int(budget),
        bool(reverse),
    )


def box_boundary_target(spec: GraphSpec, r: int, center: Sequence[int] | None = None) -> Region:
    center = (0,) * spec.dimension if center is None else center
    return inner_boundary_region(Region.box(center, r), spec)
