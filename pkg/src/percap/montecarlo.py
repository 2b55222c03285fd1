"""Replica-parallel Bernoulli and ratio estimators with truncation accounting."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial
from typing import Callable, Sequence

import multiprocessing as mp
import numpy as np

from . import _kernels as K
from .lattice import (
    GraphSpec,
    Point,
    Region,
    as_point,
    euclid,
    inner_boundary_region,
    linf,
    surface_patch_region,
)
from .percolation import DEFAULT_BUDGET, DENOMINATOR_OFFSET, run_explore_batch

Z95 = 1.959963984540054


class AllDenominatorMisses(RuntimeError):
    """No denominator replica connected; raise n or bring z closer."""


class BracketError(ValueError):
    """Both bracket ends give the same sign of the scaling mismatch."""


class Underpowered(RuntimeError):
    """Too few accepted samples to report an estimate."""


def wilson(hits: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ph = hits / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    # the exact bounds at 0 and n hits are 0 and 1; avoid rounding residue
    lo = 0.0 if hits == 0 else max(0.0, mid - half)
    hi = 1.0 if hits == n else min(1.0, mid + half)
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    """Bernoulli estimate; truncated replicas count as misses in ``value``.

    ``lower``/``upper`` resolve every truncated replica as a miss/hit.
    """

    value: float
    std_error: float
    n: int
    hits: int
    n_truncated: int
    lower: float
    upper: float
    wilson_lo: float
    wilson_hi: float

    @classmethod
    def from_counts(cls, hits: int, truncated: int, n: int) -> "Estimate":
        if n < 1:
            raise ValueError("n must be >= 1")
        hits, truncated = int(hits), int(truncated)
        v = hits / n
        lo, hi = wilson(hits, n)
        return cls(
            value=v,
            std_error=math.sqrt(v * (1 - v) / n),
            n=int(n),
            hits=hits,
            n_truncated=truncated,
            lower=v,
            upper=(hits + truncated) / n,
            wilson_lo=lo,
            wilson_hi=hi,
        )

    @classmethod
    def from_outcomes(cls, hit: np.ndarray, truncated: np.ndarray) -> "Estimate":
        return cls.from_counts(int(hit.sum()), int(truncated.sum()), len(hit))

    def near_zero(self) -> bool:
        """Whether the Wilson interval should govern (value within 5 SE of 0)."""
        return self.value <= 5 * self.std_error

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RatioEstimate:
    """numerator.value / denominator.value with a delta-method SE."""

    numerator: Estimate
    denominator: Estimate
    ratio: float
    std_error: float
    paired: bool = False

    @classmethod
    def build(cls, num: Estimate, den: Estimate, cov: float = 0.0, paired: bool = False):
        if den.value <= 0:
            raise AllDenominatorMisses(
                f"denominator had 0 hits in {den.n} replicas; increase n or decrease |z|"
            )
        r = num.value / den.value
        rel = (num.std_error / den.value) ** 2 + (r * den.std_error / den.value) ** 2
        rel -= 2 * r * cov / den.value**2
        return cls(num, den, r, math.sqrt(max(rel, 0.0)), paired)

    @property
    def ratio_lower(self) -> float:
        return self.numerator.lower / self.denominator.upper

    @property
    def ratio_upper(self) -> float:
        return self.numerator.upper / self.denominator.lower

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "std_error": self.std_error,
            "paired": self.paired,
            "numerator": self.numerator.to_dict(),
            "denominator": self.denominator.to_dict(),
        }


def pooled_se(*items) -> float:
    return math.sqrt(sum(x.std_error**2 for x in items))


# -- deterministic replica-range parallelism ------------------------------------------


def split_range(n: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous (start, count) blocks covering 0..n-1."""
    parts = max(1, min(parts, n)) if n > 0 else 1
    base, extra = divmod(n, parts)
    out, start = [], 0
    for i in range(parts):
        c = base + (1 if i < extra else 0)
        out.append((start, c))
        start += c
    return out


def replica_map(task: Callable, n: int, workers: int = 1, replica0: int = 0):
    """Run ``task(start, count)`` over contiguous replica ranges and
    concatenate each returned array in replica order.

    The result does not depend on ``workers``.
    """
    workers = max(1, int(workers))
    blocks = [(replica0 + s, c) for s, c in split_range(n, workers)]
    if workers == 1 or len(blocks) == 1:
        parts = [task(s, c) for s, c in blocks]
    else:
        ctx = mp.get_context("fork" if os.name == "posix" else "spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(task, *zip(*blocks)))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)


def _explore_task(spec, seed, seeds, region, target_pts, target_region, stop_on_hit, budget,
                  reverse, start, count):
    return run_explore_batch(
        spec, seed, start, count, seeds, region, target_pts, target_region, stop_on_hit, budget,
        reverse,
    )


def explore_replicas(spec: GraphSpec, seed: int, n: int, seeds, region: Region | None = None,
                     target_pts=None, target_region: Region | None = None,
                     stop_on_hit: bool = True, budget: int = DEFAULT_BUDGET,
                     workers: int = 1, replica0: int = 0, reverse: bool | None = None):
    """(status, size, hit index, target count) arrays over n replicas.

    Point-set connection queries (stop at the first hit, no target region)
    retry a truncated search from the target side unless ``reverse`` is
    False.
    """
    d = spec.dimension
    seeds = _pts(seeds, d)
    if target_pts is not None:
        target_pts = _pts(target_pts, d)
    if reverse is None:
        reverse = stop_on_hit and target_region is None and target_pts is not None
    task = partial(
        _explore_task, spec, int(seed), seeds, region or Region.full(), target_pts,
        target_region, bool(stop_on_hit), int(budget), bool(reverse),
    )
    return replica_map(task, n, workers, replica0)


def _pts(pts, d: int) -> np.ndarray:
    rows = [as_point(p, d) for p in pts]
    return np.array(rows, dtype=np.int64).reshape(len(rows), d)


def _hit_estimate(status: np.ndarray) -> Estimate:
    return Estimate.from_outcomes(status == K.CONNECTED, status == K.TRUNCATED)


# -- two-point function and hitting ---------------------------------------------------


def hit_outcomes(A, z, spec, n, budget=DEFAULT_BUDGET, seed=0, workers=1, replica0=0):
    """Per-replica status of {z <-> A}, exploring from z."""
    status, *_ = explore_replicas(spec, seed, n, [z], None, list(A), None, True, budget,
                                  workers, replica0)
    return status


def estimate_tau(z: Sequence[int], spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                 seed: int = 0, workers: int = 1, replica0: int = 0) -> Estimate:
    """P(0 <-> z)."""
    d = spec.dimension
    status, *_ = explore_replicas(spec, seed, n, [(0,) * d], None, [z], None, True, budget,
                                  workers, replica0)
    return _hit_estimate(status)


def estimate_hit(A, z, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET, seed: int = 0,
                 workers: int = 1, replica0: int = 0) -> Estimate:
    """P(z <-> A), stopping each replica at first contact."""
    if len(A) == 0:
        raise ValueError("A must be nonempty")
    return _hit_estimate(hit_outcomes(A, z, spec, n, budget, seed, workers, replica0))


def default_z(A, d: int, factor: int = 4) -> Point:
    """factor * diam(A) along the first axis (at least 1)."""
    diam = max((linf(a, b) for a in A for b in A), default=0)
    return (max(1, factor * diam),) + (0,) * (d - 1)


def _check_far(A, z):
    far = max(euclid(a) for a in A)
    if euclid(z) < 2 * far:
        raise ValueError(f"|z| = {euclid(z):.3g} is below 2 max|a| = {2 * far:.3g}")


def _paired_cov(hit_num: np.ndarray, hit_den: np.ndarray) -> float:
    n = len(hit_num)
    return float(np.mean(hit_num * hit_den) - hit_num.mean() * hit_den.mean()) / n


def estimate_pcap(A, z, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET, seed: int = 0,
                  workers: int = 1, paired: bool = False) -> RatioEstimate:
    """P(z <-> A) / tau(z).

    The denominator runs on replicas offset by 2^31 unless ``paired``, in
    which case both events are read off the same configurations and their
    covariance enters the SE.
    """
    d = spec.dimension
    _check_far(A, z)
    st_num = hit_outcomes(A, z, spec, n, budget, seed, workers)
    den0 = 0 if paired else DENOMINATOR_OFFSET
    st_den, *_ = explore_replicas(spec, seed, n, [(0,) * d], None, [z], None, True, budget,
                                  workers, den0)
    num, den = _hit_estimate(st_num), _hit_estimate(st_den)
    cov = 0.0
    if paired:
        cov = _paired_cov((st_num == K.CONNECTED).astype(float), (st_den == K.CONNECTED).astype(float))
    return RatioEstimate.build(num, den, cov, paired)


def estimate_tau_denominator(z, spec, n, budget=DEFAULT_BUDGET, seed=0, workers=1) -> Estimate:
    """tau(z) on the denominator stream used by every ratio estimator."""
    return estimate_tau(z, spec, n, budget, seed, workers, DENOMINATOR_OFFSET)


def estimate_two_sets(A, B, z, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                      seed: int = 0, workers: int = 1) -> RatioEstimate:
    """P(A <-> z + B) / tau(z), exploring from A."""
    d = spec.dimension
    z = as_point(z, d)
    _check_far(list(A) + list(B), z)
    zB = [tuple(zi + bi for zi, bi in zip(z, as_point(b, d))) for b in B]
    status, *_ = explore_replicas(spec, seed, n, list(A), None, zB, None, True, budget, workers)
    den = estimate_tau_denominator(z, spec, n, budget, seed, workers)
    return RatioEstimate.build(_hit_estimate(status), den)


# -- one-arm ----------------------------------------------------------------------------


def one_arm_status(A, r: int, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                   seed: int = 0, workers: int = 1, replica0: int = 0) -> np.ndarray:
    d = spec.dimension
    box = Region.box((0,) * d, r)
    status, *_ = explore_replicas(spec, seed, n, list(A), box, None,
                                  inner_boundary_region(box, spec), True, budget, workers, replica0)
    return status


def estimate_one_arm(r: int, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                     seed: int = 0, workers: int = 1, replica0: int = 0) -> Estimate:
    """P(0 <-> inner boundary of B(0,r)) using paths inside B(0,r)."""
    if r < 1:
        raise ValueError("r must be >= 1")
    d = spec.dimension
    return _hit_estimate(one_arm_status([(0,) * d], r, spec, n, budget, seed, workers, replica0))


def estimate_one_arm_set(A, r: int, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                         seed: int = 0, workers: int = 1) -> Estimate:
    """P(A <-> inner boundary of B(0,r)) for A inside B(0, r/2)."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if any(2 * linf(a) > r for a in A):
        raise ValueError("A must lie in B(0, r/2)")
    return _hit_estimate(one_arm_status(A, r, spec, n, budget, seed, workers))


# -- pioneer tail -----------------------------------------------------------------------


@dataclass
class TailTable:
    t: list[int]
    ccdf: list[float]
    conditional_ccdf: list[float]
    n: int
    n_contact: int
    n_truncated: int
    c_s2: float
    c_s3: float
    s: int

    def reference(self, t: float, power: int) -> float:
        c = self.c_s2 if power == 2 else self.c_s3
        return math.exp(-c * t / self.s**power)

    def rows(self) -> list[dict]:
        return [
            {
                "t": t,
                "ccdf": a,
                "conditional_ccdf": b,
                "ref_s2": self.reference(t, 2),
                "ref_s3": self.reference(t, 3),
            }
            for t, a, b in zip(self.t, self.ccdf, self.conditional_ccdf)
        ]


def pioneer_counts(r: int, s: int, x, spec: GraphSpec, n: int, budget: int = DEFAULT_BUDGET,
                   seed: int = 0, workers: int = 1, thick: bool = False):
    """Per replica |C_r(0) ∩ Q_s(x)| and status."""
    d = spec.dimension
    if not 1 <= s <= r:
        raise ValueError("need 1 <= s <= r")
    x = as_point(x, d)
    box = Region.box((0,) * d, r)
    if linf(x) != r:
        raise ValueError("x must lie on the boundary of B(0,r)")
    patch = surface_patch_region(x, s, box, spec, thick)
    status, _, _, counts = explore_replicas(spec, seed, n, [(0,) * d], box, None, patch, False,
                                            budget, workers)
    return counts, status


def _fit_rate(t: np.ndarray, ccdf: np.ndarray, scale: float) -> float:
    """Least-squares c in -log ccdf ~ c t / scale through the origin."""
    ok = (ccdf > 0) & (t > 0)
    if not ok.any():
        return float("nan")
    u = t[ok] / scale
    y = -np.log(ccdf[ok])
    return float((u @ y) / (u @ u))


def pioneer_tail(r: int, s: int, x, t_grid: Sequence[int], spec: GraphSpec, n: int,
                 budget: int = DEFAULT_BUDGET, seed: int = 0, workers: int = 1) -> TailTable:
    """Empirical CCDF of |C_r(0) ∩ Q_s(x)| on ``t_grid``, unconditional and
    given at least one vertex of the patch is reached."""
    counts, status = pioneer_counts(r, s, x, spec, n, budget, seed, workers)
    t = np.asarray(sorted(set(int(v) for v in t_grid)), dtype=np.int64)
    contact = counts >= 1
    ccdf = np.array([(counts >= v).mean() for v in t])
    nc = int(contact.sum())
    cond = np.array([(counts[contact] >= v).mean() if nc else 0.0 for v in t])
    return TailTable(
        t=t.tolist(),
        ccdf=ccdf.tolist(),
        conditional_ccdf=cond.tolist(),
        n=n,
        n_contact=nc,
        n_truncated=int((status == K.TRUNCATED).sum()),
        c_s2=_fit_rate(t.astype(float), cond, s**2),
        c_s3=_fit_rate(t.astype(float), cond, s**3),
        s=s,
    )


# -- critical point calibration ------------------------------------------------------


def derive_seed(seed: int, k: int) -> int:
    """Independent 63-bit seed for sub-experiment k."""
    k1, _ = K.stream_key(np.uint64(seed & (2**64 - 1)), k, 0xCA11B)
    return int(k1) >> 1


@dataclass(frozen=True)
class ScalingPoint:
    p: float
    f: float
    se: float


def scaling_mismatch(spec: GraphSpec, r_pair, n: int, budget: int, seed: int, workers: int = 1,
                     exponent: float = 2.0) -> ScalingPoint:
    """f(p) = r2^a P(0 <-> dB(r2)) - r1^a P(0 <-> dB(r1)) with its SE."""
    r1, r2 = r_pair
    e1 = estimate_one_arm(r1, spec, n, budget, derive_seed(seed, 1), workers)
    e2 = estimate_one_arm(r2, spec, n, budget, derive_seed(seed, 2), workers)
    f = r2**exponent * e2.value - r1**exponent * e1.value
    se = math.hypot(r2**exponent * e2.std_error, r1**exponent * e1.std_error)
    return ScalingPoint(spec.p, f, se)


@dataclass
class Calibration:
    p: float
    history: list[ScalingPoint]


def calibrate_pc(spec: GraphSpec, r_pair: tuple[int, int], bracket: tuple[float, float], n: int,
                 iterations: int, budget: int = DEFAULT_BUDGET, seed: int = 0, workers: int = 1,
                 exponent: float = 2.0) -> Calibration:
    """Bisection for the p at which r^a P(0 <-> dB(0,r)) agrees at both radii.

    ``exponent`` a is the one-arm exponent; 2 is the mean-field value.
    Every evaluation draws fresh replicas.
    """
    r1, r2 = r_pair
    if not 1 <= r1 < r2:
        raise ValueError("need 1 <= r1 < r2")
    lo, hi = bracket
    if not 0 <= lo < hi <= 1:
        raise ValueError("bracket must satisfy 0 <= lo < hi <= 1")
    history = []
    k = 0

    def f(p):
        nonlocal k
        k += 1
        pt = scaling_mismatch(spec.with_p(p), r_pair, n, budget, derive_seed(seed, k), workers,
                              exponent)
        history.append(pt)
        return pt

    flo, fhi = f(lo), f(hi)
    if (flo.f > 3 * flo.se and fhi.f > 3 * fhi.se) or (flo.f < -3 * flo.se and fhi.f < -3 * fhi.se):
        raise BracketError(f"f({lo}) = {flo.f:.3g} and f({hi}) = {fhi.f:.3g} share a sign")
    rising = fhi.f >= flo.f
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm.f < 0) == rising:
            lo = mid
        else:
            hi = mid
    return Calibration(0.5 * (lo + hi), history)
