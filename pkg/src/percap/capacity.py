"""Bessel-Riesz capacity Cap_{d-4} by energy minimisation over the simplex.

The energy of a probability measure mu on A is

    E(mu) = sum_{x,y in A} (1 + |x - y|)^{4-d} mu(x) mu(y)

and Cap_{d-4}(A) = 1 / min E. The kernel is positive definite for d >= 5
((1 + sqrt(s))^{-a} is completely monotone in s), so the minimiser is
unique and the problem is a strictly convex QP on the simplex.
"""

from __future__ import annotations

import json
from itertools import permutations, product
from dataclasses import dataclass, field
from math import comb, factorial, sqrt
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .lattice import Point, as_point, box_points

SIZE_GUARD = 10**5
DENSE_LIMIT = 10**4
DEFAULT_TOL = 1e-9
MASS_TOL = 1e-12


def _check_d(d: int) -> None:
    if d <= 4:
        raise ValueError("the kernel (1+|x|)^(4-d) needs d >= 5")


def riesz_kernel(x: Sequence[int], y: Sequence[int], d: int) -> float:
    _check_d(d)
    s = sum((a - b) ** 2 for a, b in zip(x, y))
    return (1.0 + sqrt(s)) ** (4 - d)


@dataclass
class Measure:
    """Finitely supported probability measure."""

    support: list[Point]
    weights: np.ndarray

    def __post_init__(self):
        self.support = [tuple(int(c) for c in x) for x in self.support]
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.support) != len(self.weights):
            raise ValueError("support and weights differ in length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support points must be distinct")
        if np.any(self.weights < 0):
            raise ValueError("negative weight")
        if abs(self.weights.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {self.weights.sum()!r} is not 1")

    @classmethod
    def point_mass(cls, x: Sequence[int]) -> "Measure":
        return cls([tuple(x)], np.ones(1))

    @classmethod
    def uniform(cls, pts: Sequence[Sequence[int]]) -> "Measure":
        return cls(list(pts), np.full(len(pts), 1.0 / len(pts)))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.weights.tolist()))


@dataclass
class SymmetricMeasure:
    """Measure invariant under the hyperoctahedral group, stored by orbit.

    ``weights[i]`` is the total mass of the orbit of ``representatives[i]``
    (a point with sorted non-negative coordinates), spread evenly over it.
    """

    representatives: list[Point]
    orbit_sizes: np.ndarray
    weights: np.ndarray

    def point_weight(self, x: Sequence[int]) -> float:
        key = tuple(sorted(abs(int(c)) for c in x))
        i = self.representatives.index(key)
        return float(self.weights[i] / self.orbit_sizes[i])

    def expand(self) -> Measure:
        """Explicit measure on every point of every orbit."""
        support, w = [], []
        for rep, size, mass in zip(self.representatives, self.orbit_sizes, self.weights):
            pts = orbit_points(rep)
            support.extend(pts)
            w.extend([mass / size] * len(pts))
        w = np.array(w)
        return Measure(support, w / w.sum())


@dataclass
class CapacityResult:
    capacity: float
    minimizer: Measure | SymmetricMeasure
    energy: float
    iterations: int
    converged: bool
    gap: float = field(default=float("nan"))

    def to_dict(self) -> dict:
        m = self.minimizer
        if isinstance(m, Measure):
            support = [list(x) for x in m.support]
            weights = m.weights.tolist()
        else:
            support = [list(x) for x in m.representatives]
            weights = m.weights.tolist()
        out = {
            "capacity": self.capacity,
            "energy": self.energy,
            "converged": self.converged,
            "iterations": self.iterations,
            "support": support,
            "weights": weights,
        }
        if isinstance(m, SymmetricMeasure):
            out["orbit_sizes"] = m.orbit_sizes.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# -- kernel matrices ----------------------------------------------------------------


@njit(cache=True)
def _kernel_matrix(pts, expo):
    n, d = pts.shape
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i + 1, n):
            s = 0
            for k in range(d):
                v = pts[i, k] - pts[j, k]
                s += v * v
            g = (1.0 + np.sqrt(np.float64(s))) ** expo
            out[i, j] = g
            out[j, i] = g
    return out


@njit(cache=True)
def _kernel_column(pts, j, expo, out):
    n, d = pts.shape
    for i in range(n):
        s = 0
        for k in range(d):
            v = pts[i, k] - pts[j, k]
            s += v * v
        out[i] = (1.0 + np.sqrt(np.float64(s))) ** expo


@njit(cache=True)
def _potential(pts, w, expo):
    n, d = pts.shape
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if w[j] == 0.0:
                continue
            s = 0
            for k in range(d):
                v = pts[i, k] - pts[j, k]
                s += v * v
            acc += (1.0 + np.sqrt(np.float64(s))) ** expo * w[j]
        out[i] = acc
    return out


class _DenseOperator:
    def __init__(self, mat: np.ndarray):
        self.mat = mat

    def column(self, j: int) -> np.ndarray:
        return self.mat[:, j]

    def apply(self, w: np.ndarray) -> np.ndarray:
        return self.mat @ w

    def entry(self, i: int, j: int) -> float:
        return float(self.mat[i, j])


class _LazyOperator:
    """Kernel columns computed on demand; used above DENSE_LIMIT points."""

    def __init__(self, pts: np.ndarray, d: int):
        self.pts = pts
        self.expo = float(4 - d)
        self._buf = np.empty(len(pts))

    def column(self, j: int) -> np.ndarray:
        _kernel_column(self.pts, j, self.expo, self._buf)
        return self._buf.copy()

    def apply(self, w: np.ndarray) -> np.ndarray:
        return _potential(self.pts, w, self.expo)

    def entry(self, i: int, j: int) -> float:
        diff = self.pts[i] - self.pts[j]
        return (1.0 + sqrt(float(diff @ diff))) ** self.expo


def _operator(pts: np.ndarray, d: int):
    if len(pts) <= DENSE_LIMIT:
        return _DenseOperator(_kernel_matrix(pts, float(4 - d)))
    return _LazyOperator(pts, d)


# -- simplex QP ------------------------------------------------------------------------


@dataclass
class _Solution:
    weights: np.ndarray
    energy: float
    iterations: int
    converged: bool
    gap: float


def minimize_on_simplex(op, n: int, tol: float, max_iter: int,
                        init: np.ndarray | None = None) -> _Solution:
    """Minimise w^T G w over the simplex by pairwise Frank-Wolfe.

    Each step moves mass from the support atom of largest potential to the
    vertex of smallest potential, with exact line search. Stops once the
    Frank-Wolfe duality gap 2 (E - min potential) is at most tol * E.
    Ties go to the lowest index.
    """
    w = np.full(n, 1.0 / n) if init is None else np.array(init, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("init must be a probability vector")
    w /= w.sum()
    pot = op.apply(w)
    energy = float(w @ pot)
    gap = 2.0 * (energy - float(pot.min()))
    it = 0
    while it < max_iter:
        s = int(np.argmin(pot))
        gap = 2.0 * (energy - float(pot[s]))
        if gap <= tol * energy:
            return _Solution(w, energy, it, True, gap)
        supp = np.flatnonzero(w > 0)
        a = int(supp[np.argmax(pot[supp])])
        if a == s:
            break
        slope = pot[s] - pot[a]  # half the directional derivative along e_s - e_a
        curv = op.entry(s, s) + op.entry(a, a) - 2.0 * op.entry(s, a)
        step = w[a] if curv <= 0 else min(w[a], -slope / curv)
        if step <= 0:
            break
        drop = step >= w[a]
        w[s] += step
        w[a] = 0.0 if drop else w[a] - step
        pot += step * (op.column(s) - op.column(a))
        it += 1
        if it % 1000 == 0:
            # refresh to stop drift of the incremental potential
            pot = op.apply(w)
        energy = float(w @ pot)
    pot = op.apply(w)
    energy = float(w @ pot)
    gap = 2.0 * (energy - float(pot.min()))
    return _Solution(w, energy, it, gap <= tol * energy, gap)


def _points_matrix(A, d: int | None = None) -> np.ndarray:
    pts = [as_point(a, d) for a in A]
    if not pts:
        raise ValueError("A must be nonempty")
    if len(set(pts)) != len(pts):
        raise ValueError("points of A must be distinct")
    return np.array(pts, dtype=np.int64).reshape(len(pts), -1)


def energy(mu: Measure, d: int) -> float:
    """The kernel double sum of ``mu``."""
    _check_d(d)
    pts = _points_matrix(mu.support)
    w = mu.weights
    return float(w @ _potential(pts, w, float(4 - d)))


def cap_d4(A: Sequence[Sequence[int]], d: int, tol: float = DEFAULT_TOL,
           max_iter: int = 200_000, init: np.ndarray | None = None) -> CapacityResult:
    """Cap_{d-4}(A) as 1 / (minimal energy), started from the uniform measure."""
    _check_d(d)
    if tol <= 0:
        raise ValueError("tol must be positive")
    pts = _points_matrix(A, d)
    if len(pts) > SIZE_GUARD:
        raise ValueError(f"|A| = {len(pts)} exceeds the size guard {SIZE_GUARD}")
    op = _operator(pts, d)
    sol = minimize_on_simplex(op, len(pts), tol, max_iter, init)
    w = np.where(sol.weights > 0, sol.weights, 0.0)
    w /= w.sum()
    keep = np.flatnonzero(w > 0)
    mu = Measure([tuple(int(c) for c in pts[i]) for i in keep], w[keep])
    e = energy(mu, d)
    return CapacityResult(1.0 / e, mu, e, sol.iterations, sol.converged, sol.gap)


def potential(mu: Measure, A: Sequence[Sequence[int]], d: int) -> np.ndarray:
    """x -> sum_y G(x, y) mu(y) for each x in A."""
    _check_d(d)
    pts = _points_matrix(list(A))
    supp = _points_matrix(mu.support)
    allp = np.vstack([pts, supp])
    w = np.concatenate([np.zeros(len(pts)), mu.weights])
    return _potential(allp, w, float(4 - d))[: len(pts)]


# -- balls via symmetry reduction -------------------------------------------------


def orbit_representatives(r: int, d: int) -> list[Point]:
    """Non-decreasing tuples in {0..r}^d, one per hyperoctahedral orbit of B(0,r)."""
    out = []

    def rec(prefix, lo):
        if len(prefix) == d:
            out.append(tuple(prefix))
            return
        for v in range(lo, r + 1):
            rec(prefix + [v], v)

    rec([], 0)
    return out


def orbit_size(rep: Sequence[int]) -> int:
    d = len(rep)
    counts: dict[int, int] = {}
    for v in rep:
        counts[v] = counts.get(v, 0) + 1
    perms = factorial(d)
    for c in counts.values():
        perms //= factorial(c)
    return perms * 2 ** sum(1 for v in rep if v != 0)


def orbit_points(rep: Sequence[int]) -> list[Point]:
    pts = set()
    for perm in set(permutations(rep)):
        nz = [i for i, v in enumerate(perm) if v != 0]
        for signs in product((1, -1), repeat=len(nz)):
            x = list(perm)
            for i, s in zip(nz, signs):
                x[i] *= s
            pts.add(tuple(x))
    return sorted(pts)


@njit(cache=True)
def _orbit_sums(reps, hist_to_orbit, r, d, gtab):
    """row[o, o'] = sum over y in orbit o' of G(rep_o, y).

    The box is walked with an odometer that updates the squared distance
    and the histogram code of |y| (base d+1 digit per absolute value)
    incrementally, so no per-point sorting is needed.
    """
    n_orb = reps.shape[0]
    out = np.zeros((n_orb, n_orb))
    base = np.empty(r + 1, dtype=np.int64)
    base[0] = 1
    for v in range(1, r + 1):
        base[v] = base[v - 1] * (d + 1)
    y = np.empty(d, dtype=np.int64)
    total = (2 * r + 1) ** d
    for o in range(n_orb):
        s2 = 0
        hcode = 0
        for i in range(d):
            y[i] = -r
            s2 += (y[i] - reps[o, i]) ** 2
            hcode += base[r]
        row = out[o]
        for _ in range(total):
            row[hist_to_orbit[hcode]] += gtab[s2]
            i = d - 1
            while i >= 0:
                old = y[i]
                new = old + 1 if old < r else -r
                y[i] = new
                s2 += (new - reps[o, i]) ** 2 - (old - reps[o, i]) ** 2
                hcode += base[abs(new)] - base[abs(old)]
                if new != -r:
                    break
                i -= 1
    return out


def _hist_code(rep, r, d) -> int:
    return sum((d + 1) ** v for v in rep)


def reduced_ball_matrix(r: int, d: int):
    """Orbit representatives, orbit sizes and the reduced energy matrix M.

    For a symmetric measure with orbit masses W the energy equals W^T M W,
    and (M W)_o is the potential at any point of orbit o.
    """
    reps = orbit_representatives(r, d)
    sizes = np.array([orbit_size(x) for x in reps], dtype=np.int64)
    rep_arr = np.array(reps, dtype=np.int64)
    hist_to_orbit = np.full((d + 1) ** (r + 1), -1, dtype=np.int64)
    for o, rep in enumerate(reps):
        hist_to_orbit[_hist_code(rep, r, d)] = o
    max_s2 = d * (2 * r) ** 2
    gtab = (1.0 + np.sqrt(np.arange(max_s2 + 1, dtype=np.float64))) ** (4 - d)
    rows = _orbit_sums(rep_arr, hist_to_orbit, r, d, gtab)
    M = rows / sizes[None, :]
    # symmetrise away rounding; exact M is symmetric
    M = 0.5 * (M + M.T)
    return reps, sizes, M


def ball_capacity(r: int, d: int, tol: float = DEFAULT_TOL, symmetric: bool = True,
                  max_iter: int = 200_000) -> CapacityResult:
    """Cap_{d-4}(B(0,r)) for the lattice box of L-infinity radius r.

    With ``symmetric`` the minimiser, which is unique and hence invariant
    under coordinate permutations and reflections, is sought among
    invariant measures: one unknown per orbit, C(r+d, d) in total. The size
    guard then applies to that count. Otherwise the full point set is used
    and the guard applies to (2r+1)^d.
    """
    _check_d(d)
    if r < 0:
        raise ValueError("r must be >= 0")
    if not symmetric:
        n = (2 * r + 1) ** d
        if n > SIZE_GUARD:
            raise ValueError(f"B(0,{r}) in d={d} has {n} points, above the size guard {SIZE_GUARD}")
        return cap_d4([tuple(p) for p in box_points((0,) * d, r)], d, tol, max_iter)
    n_orb = comb(r + d, d)
    if n_orb > SIZE_GUARD:
        raise ValueError(f"{n_orb} orbits exceed the size guard {SIZE_GUARD}")
    reps, sizes, M = reduced_ball_matrix(r, d)
    sol = minimize_on_simplex(_DenseOperator(M), len(reps), tol, max_iter)
    W = np.where(sol.weights > 0, sol.weights, 0.0)
    W /= W.sum()
    e = float(W @ M @ W)
    mu = SymmetricMeasure(reps, sizes, W)
    return CapacityResult(1.0 / e, mu, e, sol.iterations, sol.converged, sol.gap)


def ball_size(r: int, d: int) -> int:
    return (2 * r + 1) ** d


# -- file formats ----------------------------------------------------------------------


def read_points(path: str | Path) -> tuple[int, list[Point]]:
    """Read a point file: a "d n" header, then n lines of d integers."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty point file")
    d, n = (int(v) for v in lines[0].split())
    pts = [as_point([int(v) for v in ln.split()], d) for ln in lines[1:]]
    if len(pts) != n:
        raise ValueError(f"header announces {n} points, found {len(pts)}")
    return d, pts


def write_points(path: str | Path, pts: Sequence[Sequence[int]], d: int) -> None:
    body = "".join(" ".join(str(c) for c in p) + "\n" for p in pts)
    Path(path).write_text(f"{d} {len(pts)}\n{body}")
