"""Random walks on clusters, equilibrium-measure estimators and IIC sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels as K
from .capacity import Measure
from .lattice import GraphSpec, Point, Region, as_point, euclid, offsets
from .montecarlo import (
    Estimate,
    RatioEstimate,
    Underpowered,
    _check_far,
    _pts,
    estimate_tau_denominator,
    pooled_se,
    replica_map,
)
from .percolation import DEFAULT_BUDGET, Cluster, Configuration, explore, kernel_model, seed64

DEFAULT_MAX_STEPS = 10**6
MIN_ACCEPTED = 100
IIC_CHUNK = 1 << 18


class Exhausted(RuntimeError):
    """No accepted configuration within the attempt budget."""


# -- cluster graphs and walks ------------------------------------------------------------


@dataclass
class ClusterGraph:
    """Undirected graph; neighbour lists are kept in a fixed order."""

    vertices: list
    adjacency: dict

    def __post_init__(self):
        for v, nbrs in self.adjacency.items():
            for u in nbrs:
                if v not in self.adjacency.get(u, ()):
                    raise ValueError(f"adjacency is not symmetric at {v}-{u}")

    @classmethod
    def from_edges(cls, vertices, edges) -> "ClusterGraph":
        adj = {v: [] for v in vertices}
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        return cls(list(vertices), adj)

    @classmethod
    def from_cluster(cls, cluster: Cluster, spec: GraphSpec) -> "ClusterGraph":
        """Neighbours ordered by the lattice offset order, as in the compiled walk."""
        rank = {tuple(int(c) for c in o): k for k, o in enumerate(offsets(spec))}
        adj = {v: [] for v in cluster.order or sorted(cluster.vertices)}
        for e in cluster.open_edges:
            adj[e.a].append(e.b)
            adj[e.b].append(e.a)
        for v, nbrs in adj.items():
            nbrs.sort(key=lambda u: rank[tuple(ui - vi for ui, vi in zip(u, v))])
        return cls(list(adj), adj)

    def __contains__(self, v) -> bool:
        return v in self.adjacency


class CounterStream:
    """Uniform draws at successive counters of a keyed stream."""

    def __init__(self, seed: int, replica: int = 0, tag: int = K.TAG_WALK):
        k1, k2 = K.stream_key(seed64(seed), int(replica), tag)
        self.k1, self.k2 = np.uint64(k1), np.uint64(k2)
        self.counter = 0

    def below(self, m: int) -> int:
        """Uniform integer in [0, m); same mapping as the compiled walk."""
        u = int(K.draw_u53(self.k1, self.k2, self.counter))
        self.counter += 1
        return (u * m) >> 53 if m < 2048 else u % m


@dataclass(frozen=True)
class HitRecord:
    hit_point: Point | None
    steps: int

    @property
    def timeout(self) -> bool:
        return self.hit_point is None


def srw_hit(g: ClusterGraph, start, A, max_steps: int = DEFAULT_MAX_STEPS,
            rng_stream: CounterStream | None = None) -> HitRecord:
    """Walk from ``start`` choosing a uniform neighbour each step until A is entered."""
    targets = {tuple(a) for a in A}
    if not any(a in g for a in targets):
        raise ValueError("A does not meet the graph")
    cur = tuple(start)
    if cur not in g:
        raise ValueError("start is not a vertex of the graph")
    stream = rng_stream or CounterStream(0)
    steps = 0
    if cur in targets:
        return HitRecord(cur, 0)
    while steps < max_steps:
        nbrs = g.adjacency[cur]
        if not nbrs:
            break
        cur = nbrs[stream.below(len(nbrs))]
        steps += 1
        if cur in targets:
            return HitRecord(cur, steps)
    return HitRecord(None, steps)


@dataclass
class HittingSolution:
    targets: list
    matrix: np.ndarray  # rows: vertices, columns: targets
    vertices: list
    residual: float

    def row(self, v) -> np.ndarray:
        return self.matrix[self.vertices.index(tuple(v))]


def solve_hitting(g: ClusterGraph, A) -> HittingSolution:
    """Hitting distribution on A from every vertex, by the absorbing-chain solve."""
    index = {v: i for i, v in enumerate(g.vertices)}
    targets = [tuple(a) for a in A if tuple(a) in index]
    if not targets:
        raise ValueError("A does not meet the graph")
    tset = set(targets)
    free = [v for v in g.vertices if v not in tset]
    fidx = {v: i for i, v in enumerate(free)}
    tidx = {v: j for j, v in enumerate(targets)}
    rows, cols, vals = [], [], []
    R = np.zeros((len(free), len(targets)))
    for v in free:
        i = fidx[v]
        nbrs = g.adjacency[v]
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        for u in nbrs:
            if u in tidx:
                R[i, tidx[u]] += 1.0 / len(nbrs)
            else:
                rows.append(i)
                cols.append(fidx[u])
                vals.append(-1.0 / len(nbrs))
    H = np.zeros((len(g.vertices), len(targets)))
    residual = 0.0
    if free:
        Mat = sp.csc_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
        X = spla.splu(Mat).solve(R) if len(free) > 1 else R / Mat.toarray()[0, 0]
        X = np.asarray(X).reshape(len(free), len(targets))
        residual = float(np.abs(Mat @ X - R).max()) if R.size else 0.0
        for v, i in fidx.items():
            H[index[v]] = X[i]
    for v, j in tidx.items():
        H[index[v], j] = 1.0
    return HittingSolution(targets, H, list(g.vertices), residual)


def exact_hit_distribution(g: ClusterGraph, start, A) -> Measure:
    """Law of the first vertex of A entered by the walk from ``start``.

    The walk must be able to reach A from ``start`` (connected graph).
    """
    if len(g.vertices) > 10**4:
        raise ValueError("graph too large for the exact solve")
    sol = solve_hitting(g, A)
    w = sol.row(start)
    keep = np.flatnonzero(w > 0)
    w = w[keep]
    if abs(w.sum() - 1.0) > 1e-10:
        raise ValueError("A is not reachable from start with probability 1")
    return Measure([sol.targets[i] for i in keep], w / w.sum())


# -- equilibrium measure ------------------------------------------------------------------


@dataclass
class EquilibriumResult:
    points: list
    estimates: list[RatioEstimate]
    total: RatioEstimate
    n_timeout: int
    n_truncated: int

    def to_list(self) -> list[dict]:
        return [
            {"point": list(a), "e_hat": e.ratio, "se": e.std_error}
            for a, e in zip(self.points, self.estimates)
        ]

    @property
    def sum_se(self) -> float:
        return self.total.std_error


def _equilibrium_task(spec, seed, z, apts, budget, max_steps, start, count):
    m = kernel_model(spec)
    return K.batch_equilibrium(
        seed64(seed), start, count, *m.args(), z, apts, int(budget), int(max_steps)
    )


def _per_point(points, hit_index, valid, den: Estimate, n_trunc_each):
    out = []
    for i in range(len(points)):
        num = Estimate.from_counts(int(((hit_index == i) & valid).sum()), n_trunc_each, len(hit_index))
        out.append(RatioEstimate.build(num, den))
    return out


def estimate_equilibrium(A, z, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                         max_steps: int = DEFAULT_MAX_STEPS, seed: int = 0,
                         workers: int = 1) -> EquilibriumResult:
    """e_A(a) as P(walk on C(z) from z first enters A at a) / tau(z).

    Replicas whose walk times out are excluded from every numerator and
    counted separately.
    """
    d = spec.dimension
    z = as_point(z, d)
    _check_far(A, z)
    apts = _pts(A, d)
    task = partial(_equilibrium_task, spec, int(seed), np.array(z, dtype=np.int64), apts, budget,
                   max_steps)
    status, hits, _ = replica_map(task, n, workers)
    den = estimate_tau_denominator(z, spec, n, budget, seed, workers)
    valid = status == K.CONNECTED
    n_trunc = int((status == K.TRUNCATED).sum())
    n_to = int((status == K.TIMEOUT).sum())
    points = [tuple(int(c) for c in a) for a in apts]
    est = _per_point(points, hits, valid, den, n_trunc + n_to)
    total = RatioEstimate.build(Estimate.from_counts(int(valid.sum()), n_trunc + n_to, n), den)
    return EquilibriumResult(points, est, total, n_to, n_trunc)


def _ordering_task(spec, seed, z, apts, budget, start, count):
    m = kernel_model(spec)
    return K.batch_ordering(seed64(seed), start, count, *m.args(), z, apts, int(budget))


def ordering_equilibrium(A, z, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                         seed: int = 0, workers: int = 1) -> EquilibriumResult:
    """For the given order a_1..a_k of A, estimate
    P(a_i in C(z), a_j not in C(z) for j < i) / tau(z)."""
    d = spec.dimension
    z = as_point(z, d)
    pts = [as_point(a, d) for a in A]
    if len(set(pts)) != len(pts):
        raise ValueError("ordered points must be distinct")
    _check_far(pts, z)
    apts = _pts(pts, d)
    task = partial(_ordering_task, spec, int(seed), np.array(z, dtype=np.int64), apts, budget)
    status, first = replica_map(task, n, workers)
    den = estimate_tau_denominator(z, spec, n, budget, seed, workers)
    valid = status == K.CONNECTED
    n_trunc = int((status == K.TRUNCATED).sum())
    est = _per_point(pts, first, valid, den, n_trunc)
    total = RatioEstimate.build(Estimate.from_counts(int(valid.sum()), n_trunc, n), den)
    return EquilibriumResult(pts, est, total, 0, n_trunc)


# -- incipient infinite cluster -------------------------------------------------------------


def _iic_task(spec, seed, x, w, apts, region, budget, start, count):
    m = kernel_model(spec)
    rk, rc, ra, rb = region.encode(spec.dimension)
    return K.batch_iic(
        seed64(seed), start, count, *m.args(), x, w, apts, rk, rc, ra, rb, int(budget)
    )


def iic_attempts(x, w, A, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                 region: Region | None = None, seed: int = 0, workers: int = 1,
                 replica0: int = 0) -> np.ndarray:
    """Per-attempt outcome codes: 0 rejected, 1 accepted and C(x) misses A,
    2 accepted and hits A, 3 acceptance test truncated, 4 A test truncated."""
    d = spec.dimension
    task = partial(
        _iic_task, spec, int(seed), np.array(as_point(x, d), dtype=np.int64),
        np.array(as_point(w, d), dtype=np.int64), _pts(A, d), region or Region.full(), budget,
    )
    return replica_map(task, n, workers, replica0)


@dataclass
class IICSample:
    cluster: Cluster
    attempts: int
    replica: int


def iic_sample(x, w, spec: GraphSpec, budget: int = DEFAULT_BUDGET, max_attempts: int = 10**6,
               region: Region | None = None, seed: int = 0, first_replica: int = 0) -> IICSample:
    """C(x) in the first configuration (from ``first_replica`` on) where x <-> w."""
    d = spec.dimension
    x, w = as_point(x, d), as_point(w, d)
    if x == w:
        raise ValueError("w must differ from x")
    done = 0
    chunk = 64
    while done < max_attempts:
        m = min(chunk, max_attempts - done)
        chunk = min(2 * chunk, IIC_CHUNK)
        codes = iic_attempts(x, w, [x], spec, m, budget, region, seed, 1, first_replica + done)
        acc = np.flatnonzero((codes == 1) | (codes == 2) | (codes == 4))
        if len(acc):
            j = first_replica + done + int(acc[0])
            cfg = Configuration(spec, seed, j)
            cl = explore(cfg, x, region, budget)
            return IICSample(cl, done + int(acc[0]) + 1, j)
        done += m
    raise Exhausted(f"no x <-> w configuration in {max_attempts} attempts")


@dataclass
class IICEstimate:
    z: Point
    w: Point
    accepted: int
    attempts: int
    hits: int
    n_truncated: int
    frequency: Estimate
    scale: float

    @property
    def scaled(self) -> float:
        return self.frequency.value * self.scale

    @property
    def scaled_se(self) -> float:
        return self.frequency.std_error * self.scale

    @property
    def acceptance(self) -> Estimate:
        return Estimate.from_counts(self.accepted, 0, self.attempts)

    def to_dict(self) -> dict:
        return {
            "z": list(self.z),
            "w": list(self.w),
            "accepted": self.accepted,
            "attempts": self.attempts,
            "hits": self.hits,
            "truncated": self.n_truncated,
            "frequency": self.frequency.value,
            "frequency_se": self.frequency.std_error,
            "scaled": self.scaled,
            "scaled_se": self.scaled_se,
        }


def estimate_iic_hit(A, z, w_norm: int, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                     max_attempts: int = 10**9, seed: int = 0, workers: int = 1,
                     axis: int | None = None, min_accepted: int = MIN_ACCEPTED) -> IICEstimate:
    """|z|^(d-4) P(C(z) meets A | z <-> w) from the first n accepted attempts.

    w = z + w_norm e_axis (axis defaults to the last one), so the
    conditioning point sits at distance w_norm from z.
    """
    d = spec.dimension
    z = as_point(z, d)
    if len(A) == 0:
        raise ValueError("A must be nonempty")
    diam = max(math.dist(a, b) for a in A for b in A)
    if euclid(z) < 2 * diam + 2 and not any(tuple(a) == z for a in A):
        raise ValueError("need |z| >= 2 diam(A) + 2")
    axis = d - 1 if axis is None else axis
    w = list(z)
    w[axis] += int(w_norm)
    w = tuple(w)
    codes_all = []
    accepted = 0
    done = 0
    chunk = max(IIC_CHUNK, workers * 4096)
    while accepted < n and done < max_attempts:
        m = min(chunk, max_attempts - done)
        codes = iic_attempts(z, w, A, spec, m, budget, None, seed, workers, done)
        codes_all.append(codes)
        accepted += int(((codes == 1) | (codes == 2) | (codes == 4)).sum())
        done += m
    codes = np.concatenate(codes_all) if codes_all else np.empty(0, dtype=np.int8)
    acc_idx = np.flatnonzero((codes == 1) | (codes == 2) | (codes == 4))[:n]
    # reaching the requested n is always enough, even below the floor
    if len(acc_idx) < min(min_accepted, n):
        raise Underpowered(f"only {len(acc_idx)} accepted samples in {done} attempts")
    attempts = int(acc_idx[-1]) + 1 if len(acc_idx) == n else len(codes)
    sel = codes[acc_idx]
    freq = Estimate.from_outcomes(sel == 2, sel == 4)
    return IICEstimate(
        z=z,
        w=w,
        accepted=len(acc_idx),
        attempts=attempts,
        hits=int((sel == 2).sum()),
        n_truncated=int((sel == 4).sum()) + int((codes[:attempts] == 3).sum()),
        frequency=freq,
        scale=euclid(z) ** (d - 4),
    )


def frequency_se(*items: IICEstimate) -> float:
    return pooled_se(*(i.frequency for i in items))
