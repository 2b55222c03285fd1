"""Density conditions on pioneer points, K-regular points and line-good points."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from . import _kernels as K
from .lattice import GraphSpec, Point, Region, as_point, linf
from .montecarlo import Estimate, replica_map
from .percolation import (
    DEFAULT_BUDGET,
    Cluster,
    Configuration,
    _run_once,
    edge_state,
    explore,
    kernel_model,
)

DEFAULT_K = 4
MIN_SCALE = 3

# Largest B(x, s^d) ∩ B(0, r) volume the local check will explore.
LOCAL_GUARD = 2_000_000


class Infeasible(RuntimeError):
    """The local check would need a larger exploration than the guard allows."""


def _check_scale(s: int) -> None:
    if s < MIN_SCALE:
        raise ValueError(f"scale s={s} is below {MIN_SCALE}")


def volume_threshold(s: int, log_power: int = 7) -> float:
    return s**4 * math.log(s) ** log_power


def surface_threshold(s: int, log_power: int = 7, cubed: bool = False) -> float:
    return s ** (3 if cubed else 2) * math.log(s) ** log_power


def _box_of(cluster: Cluster) -> tuple[Point, int]:
    if not cluster.region.is_box:
        raise ValueError("cluster must be explored inside a Box")
    return cluster.region.center, cluster.region.a


def _on_boundary(v, center, r, reach) -> bool:
    return linf(v, center) > r - reach


@dataclass(frozen=True)
class DensityResult:
    s: int
    volume: int
    surface: int
    volume_limit: float
    surface_limit: float

    @property
    def volume_ok(self) -> bool:
        return self.volume <= self.volume_limit

    @property
    def surface_ok(self) -> bool:
        return self.surface <= self.surface_limit

    @property
    def passed(self) -> bool:
        return self.volume_ok and self.surface_ok

    def __bool__(self) -> bool:
        return self.passed


def density_check(cluster: Cluster, x: Sequence[int], s: int, spec: GraphSpec | None = None,
                  cubed: bool = False) -> DensityResult:
    """Count cluster points in B(x, s), and those also on the box boundary,
    against s^4 (ln s)^7 and s^2 (ln s)^7 (s^3 with ``cubed``)."""
    _check_scale(s)
    center, r = _box_of(cluster)
    reach = 1 if spec is None else spec.reach
    x = tuple(x)
    if x not in cluster.vertices or not _on_boundary(x, center, r, reach):
        raise ValueError(f"{x} is not a pioneer of the cluster")
    vol = surf = 0
    for v in cluster.vertices:
        if linf(v, x) <= s:
            vol += 1
            if _on_boundary(v, center, r, reach):
                surf += 1
    return DensityResult(s, vol, surf, volume_threshold(s), surface_threshold(s, cubed=cubed))


@dataclass(frozen=True)
class Failure:
    point: Point
    s: int
    condition: str  # "volume" or "surface"


@dataclass
class RegularityReport:
    r: int
    K: int
    pioneers: list[Point]
    regular: list[Point]
    separated_regular: list[Point]
    failures: list[Failure] = field(default_factory=list)
    line_good: list[Point] = field(default_factory=list)
    projected_line_good: list[Point] = field(default_factory=list)

    @property
    def irregular(self) -> list[Point]:
        return [f.point for f in self.failures]

    def to_dict(self) -> dict:
        pts = lambda xs: [list(x) for x in xs]  # noqa: E731
        return {
            "r": self.r,
            "K": self.K,
            "pioneers": pts(self.pioneers),
            "regular": pts(self.regular),
            "separated_regular": pts(self.separated_regular),
            "failures": [{"point": list(f.point), "s": f.s, "condition": f.condition}
                         for f in self.failures],
            "line_good": pts(self.line_good),
            "projected_line_good": pts(self.projected_line_good),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RegularityReport":
        tup = lambda xs: [tuple(x) for x in xs]  # noqa: E731
        return cls(
            r=data["r"], K=data["K"],
            pioneers=tup(data["pioneers"]),
            regular=tup(data["regular"]),
            separated_regular=tup(data["separated_regular"]),
            failures=[Failure(tuple(f["point"]), f["s"], f["condition"]) for f in data["failures"]],
            line_good=tup(data["line_good"]),
            projected_line_good=tup(data["projected_line_good"]),
        )


@njit(cache=True)
def _scale_counts(verts, onb, pios, smax):
    """Cumulative counts of cluster points (all, boundary) within L∞ distance s
    of each pioneer, for s = 0..smax."""
    npio, d = pios.shape
    vol = np.zeros((npio, smax + 1), dtype=np.int64)
    surf = np.zeros((npio, smax + 1), dtype=np.int64)
    for i in range(npio):
        for j in range(verts.shape[0]):
            m = 0
            for k in range(d):
                a = abs(verts[j, k] - pios[i, k])
                if a > m:
                    m = a
            if m <= smax:
                vol[i, m] += 1
                if onb[j]:
                    surf[i, m] += 1
        for s in range(1, smax + 1):
            vol[i, s] += vol[i, s - 1]
            surf[i, s] += surf[i, s - 1]
    return vol, surf


def greedy_separated(points: Sequence[Point], gap: int) -> list[Point]:
    """Greedy maximal subset, in lexicographic order, with pairwise L∞ distance >= gap."""
    chosen: list[Point] = []
    for x in sorted(points):
        if all(linf(x, y) >= gap for y in chosen):
            chosen.append(x)
    return chosen


def _classify_arrays(verts: np.ndarray, r: int, K_: int, reach: int, cubed: bool):
    center_dist = np.abs(verts).max(axis=1) if len(verts) else np.empty(0, dtype=np.int64)
    onb = center_dist > r - reach
    pios = verts[onb]
    smax = 2 * r
    regular, failures = [], []
    if len(pios) == 0:
        return [], [], []
    scales = np.arange(K_, smax + 1)
    vol_lim = np.array([volume_threshold(s) for s in scales])
    surf_lim = np.array([surface_threshold(s, cubed=cubed) for s in scales])
    vol, surf = _scale_counts(np.ascontiguousarray(verts), onb, np.ascontiguousarray(pios), smax)
    vbad = vol[:, K_:] > vol_lim
    sbad = surf[:, K_:] > surf_lim
    pio_list = [tuple(int(c) for c in p) for p in pios]
    for i, x in enumerate(pio_list):
        bad = vbad[i] | sbad[i]
        if not bad.any():
            regular.append(x)
            continue
        j = int(np.argmax(bad))
        failures.append(Failure(x, int(scales[j]), "volume" if vbad[i, j] else "surface"))
    return sorted(pio_list), sorted(regular), sorted(failures, key=lambda f: f.point)


def classify_regular(cluster: Cluster, K: int = DEFAULT_K, spec: GraphSpec | None = None,
                     cubed: bool = False) -> RegularityReport:
    """Mark a pioneer regular when the density check passes at every integer
    scale in [K, 2r]; the cluster must live in a box centred at the origin."""
    _check_scale(K)
    center, r = _box_of(cluster)
    if any(center):
        raise ValueError("cluster box must be centred at the origin")
    reach = 1 if spec is None else spec.reach
    d = len(center)
    verts = np.array(sorted(cluster.vertices), dtype=np.int64).reshape(-1, d)
    pios, regular, failures = _classify_arrays(verts, r, K, reach, cubed)
    return RegularityReport(r, K, pios, regular, greedy_separated(regular, 2 * K), failures)


# -- disjoint paths ------------------------------------------------------------------


def max_disjoint_paths(n_vertices: int, edges: Sequence[tuple[int, int]], sources, sinks,
                       vertex_disjoint: bool = True) -> int:
    """Maximum number of disjoint paths from ``sources`` to ``sinks`` in an
    undirected graph, by unit-capacity max-flow (Menger).

    A vertex in both sets counts as a path of length zero.
    """
    sources, sinks = sorted(set(sources)), sorted(set(sinks))
    if not sources or not sinks:
        return 0
    big = n_vertices + 1
    rows, cols, caps = [], [], []

    def arc(a, b, c):
        rows.append(a)
        cols.append(b)
        caps.append(c)

    if vertex_disjoint:
        # v_in = v, v_out = v + n; S = 2n, T = 2n+1
        n = n_vertices
        S, T = 2 * n, 2 * n + 1
        for v in range(n):
            arc(v, v + n, 1)
        for a, b in edges:
            arc(a + n, b, 1)
            arc(b + n, a, 1)
        for v in sources:
            arc(S, v, 1)
        for v in sinks:
            arc(v + n, T, 1)
        size = 2 * n + 2
    else:
        n = n_vertices
        S, T = n, n + 1
        for a, b in edges:
            arc(a, b, 1)
            arc(b, a, 1)
        for v in sources:
            arc(S, v, big)
        for v in sinks:
            arc(v, T, big)
        size = n + 2
    g = csr_matrix((np.array(caps, dtype=np.int32), (rows, cols)), shape=(size, size))
    g.sum_duplicates()
    return int(maximum_flow(g, S, T).flow_value)


@dataclass(frozen=True)
class LocalDensityResult:
    s: int
    max_volume: int
    max_surface: int
    paths: int
    volume_limit: float
    surface_limit: float
    path_limit: float

    @property
    def passed(self) -> bool:
        return (self.max_volume <= self.volume_limit and self.max_surface <= self.surface_limit
                and self.paths <= self.path_limit)

    def __bool__(self) -> bool:
        return self.passed


def _window_volume(x, s_big, r) -> int:
    vol = 1
    for c in x:
        lo, hi = max(c - s_big, -r), min(c + s_big, r)
        vol *= max(0, hi - lo + 1)
    return vol


def local_density_check(cfg: Configuration, x: Sequence[int], s: int, r: int,
                        vertex_disjoint: bool = True, guard: int = LOCAL_GUARD) -> LocalDensityResult:
    """Local density event at pioneer candidate x of the box B(0, r).

    Inside the window B(x, s^d) ∩ B(0, r), every cluster meeting B(x, s) is
    counted against s^4 (ln s)^4 in B(x, s) and s^2 (ln s)^4 on the box
    boundary, and the number of disjoint open paths from B(x, s) to the
    inner boundary of B(x, s^d) against (ln s)^3.
    """
    _check_scale(s)
    spec = cfg.spec
    d = spec.dimension
    x = as_point(x, d)
    s_big = s**d
    if _window_volume(x, s_big, r) > guard:
        raise Infeasible(f"window of s={s} in d={d} exceeds {guard} vertices")
    window = Region.box(x, s_big).intersect(Region.box((0,) * d, r))
    reach = spec.reach

    # all components meeting B(x, s)
    inner = [v for v in _ball(x, s) if linf(v, (0,) * d) <= r]
    comp_of: dict[Point, int] = {}
    verts: list[Point] = []
    max_vol = max_surf = 0
    for y in inner:
        if y in comp_of:
            continue
        cl = explore(cfg, y, window, budget=guard)
        cid = len(verts)
        vol = surf = 0
        for v in cl.vertices:
            comp_of[v] = cid
            verts.append(v)
            if linf(v, x) <= s:
                vol += 1
                if _on_boundary(v, (0,) * d, r, reach):
                    surf += 1
        max_vol = max(max_vol, vol)
        max_surf = max(max_surf, surf)
    index = {v: i for i, v in enumerate(verts)}
    model = kernel_model(spec)
    k1, k2 = cfg.keys
    pts = np.array(verts, dtype=np.int64).reshape(-1, d)
    ia, ib = K.open_edges_within(pts, k1, k2, *model.args())
    edges = list(zip(ia.tolist(), ib.tolist()))
    sources = [index[v] for v in inner]
    sinks = [i for i, v in enumerate(verts) if linf(v, x) > s_big - reach]
    paths = max_disjoint_paths(len(verts), edges, sources, sinks, vertex_disjoint)
    ln = math.log(s)
    return LocalDensityResult(s, max_vol, max_surf, paths, s**4 * ln**4, s**2 * ln**4, ln**3)


def _ball(x: Point, s: int) -> list[Point]:
    d = len(x)
    grid = np.stack(np.meshgrid(*[np.arange(c - s, c + s + 1) for c in x], indexing="ij"), -1)
    return [tuple(int(c) for c in row) for row in grid.reshape(-1, d)]


# -- line-good points -----------------------------------------------------------------


def outward_axis(x: Sequence[int], r: int) -> tuple[int, int]:
    """Lowest axis on which |x_i| = r, and the sign of x_i there."""
    for i, c in enumerate(x):
        if abs(c) == r:
            return i, (1 if c > 0 else -1)
    raise ValueError(f"{tuple(x)} is not on the boundary of B(0, {r})")


def segment(x: Sequence[int], r: int, K: int) -> list[Point]:
    """Vertices x, x+e, ..., x+Ke along the outward normal."""
    axis, sign = outward_axis(x, r)
    out = []
    for t in range(K + 1):
        y = list(x)
        y[axis] += sign * t
        out.append(tuple(y))
    return out


def line_good(cfg: Configuration, report: RegularityReport, K: int | None = None) -> RegularityReport:
    """Fill the line-good fields: x is line-good when its K outward edges are all open."""
    if cfg.spec.connectivity != "nn":
        raise ValueError("line-good segments are built for nearest-neighbour lattices only")
    K = report.K if K is None else K
    good, ends = [], []
    for x in report.separated_regular:
        seg = segment(x, report.r, K)
        if all(edge_state(cfg, (seg[t], seg[t + 1])) for t in range(K)):
            good.append(x)
            ends.append(seg[-1])
    report.line_good = good
    report.projected_line_good = ends
    return report


def _line_good_count(k1, k2, thr, mult, pts, r, K_) -> int:
    count = 0
    for x in pts:
        axis, sign = outward_axis(x, r)
        a = np.array(x, dtype=np.int64)
        ok = True
        for _ in range(K_):
            b = a.copy()
            b[axis] += sign
            if not K.edge_open(a, b, k1, k2, thr, mult):
                ok = False
                break
            a = b
        count += ok
    return count


# -- replica experiment -----------------------------------------------------------------


def _regularity_task(spec, seed, r, K_, budget, cubed, start, count):
    d = spec.dimension
    model = kernel_model(spec)
    box = Region.box((0,) * d, r)
    seeds = np.zeros((1, d), dtype=np.int64)
    empty = np.empty((0, d), dtype=np.int64)
    out = np.zeros((count, 4), dtype=np.int64)  # X_r, regular, line-good, truncated
    for i in range(count):
        cfg = Configuration(spec, seed, start + i)
        status, _, _, _, pts = _run_once(cfg, seeds, box, empty, None, False, budget)
        if status == K.TRUNCATED:
            out[i, 3] = 1
            continue
        pios, regular, _ = _classify_arrays(pts, r, K_, spec.reach, cubed)
        sep = greedy_separated(regular, 2 * K_)
        k1, k2 = cfg.keys
        out[i, 0] = len(pios)
        out[i, 1] = len(regular)
        out[i, 2] = _line_good_count(k1, k2, model.thr, model.mult, sep, r, K_)
    return out


@dataclass
class RegularFractionTable:
    r: int
    K: int
    n: int
    n_truncated: int
    events: dict[int, Estimate]
    mean_pioneers: float
    mean_regular: float
    mean_line_good: float
    max_pioneers: int

    def rows(self) -> list[dict]:
        return [
            {"M": M, **est.to_dict()} for M, est in sorted(self.events.items())
        ]

    def to_dict(self) -> dict:
        return {
            "r": self.r, "K": self.K, "n": self.n, "n_truncated": self.n_truncated,
            "events": self.rows(),
            "mean_pioneers": self.mean_pioneers,
            "mean_regular": self.mean_regular,
            "mean_line_good": self.mean_line_good,
            "max_pioneers": self.max_pioneers,
        }


def regularity_counts(r: int, K: int, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                      seed: int = 0, workers: int = 1, replica0: int = 0,
                      cubed: bool = False) -> np.ndarray:
    """Per replica: X_r, X_r^{K-reg}, X_r^{K-line-good}, truncated flag."""
    _check_scale(K)
    if spec.connectivity != "nn":
        raise ValueError("line-good counts need a nearest-neighbour lattice")
    task = partial(_regularity_task, spec, seed, r, K, budget, cubed)
    return replica_map(task, n, workers, replica0)


def regular_fraction_experiment(r: int, K: int, M, spec: GraphSpec, n: int,
                                budget: int = DEFAULT_BUDGET, seed: int = 0,
                                workers: int = 1) -> RegularFractionTable:
    """Frequency of {X_r >= M and X_r^{K-reg} <= X_r / 2}, for one M or several."""
    Ms = [int(M)] if np.isscalar(M) else [int(m) for m in M]
    counts = regularity_counts(r, K, spec, n, budget, seed, workers)
    xr, reg, lg, trunc = counts.T
    trunc = trunc.astype(bool)
    events = {}
    for m in Ms:
        hit = (xr >= m) & (2 * reg <= xr) & ~trunc
        events[m] = Estimate.from_outcomes(hit, trunc)
    ok = ~trunc
    mean = lambda a: float(a[ok].mean()) if ok.any() else float("nan")  # noqa: E731
    return RegularFractionTable(
        r, K, n, int(trunc.sum()), events, mean(xr), mean(reg), mean(lg),
        int(xr.max()) if len(xr) else 0,
    )
