"""Experiment configs, dispatch to the estimators, and result files."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from . import __version__
from .capacity import ball_capacity, cap_d4
from .lattice import GraphSpec, Point, unit
from .montecarlo import (
    Estimate,
    RatioEstimate,
    calibrate_pc,
    default_z,
    derive_seed,
    estimate_one_arm,
    estimate_one_arm_set,
    estimate_pcap,
    estimate_tau,
    estimate_two_sets,
    pioneer_tail,
)
from .percolation import DEFAULT_BUDGET
from .regularity import DEFAULT_K, regular_fraction_experiment
from .walker import DEFAULT_MAX_STEPS, estimate_equilibrium, estimate_iic_hit, ordering_equilibrium


class ConfigError(ValueError):
    """Invalid experiment configuration."""


KINDS = (
    "tau", "pcap", "two_sets", "one_arm", "one_arm_set", "pioneer_tail", "regularity",
    "equilibrium", "ordering_equilibrium", "iic_hit", "ball_capacity", "cap_d4", "calibrate_pc",
)

# fields each kind needs beyond dimension; p is needed by every sampling kind
_REQUIRED = {
    "tau": ("z", "n"),
    "pcap": ("A", "n"),
    "two_sets": ("A", "B", "z", "n"),
    "one_arm": ("r", "n"),
    "one_arm_set": ("A", "r", "n"),
    "pioneer_tail": ("r", "s", "n"),
    "regularity": ("r", "M", "n"),
    "equilibrium": ("A", "n"),
    "ordering_equilibrium": ("A", "n"),
    "iic_hit": ("A", "z", "w", "n"),
    "ball_capacity": ("r",),
    "cap_d4": ("A",),
    "calibrate_pc": ("r_pair", "bracket", "n", "iterations"),
}
_NO_P = {"ball_capacity", "cap_d4"}

STANDARD_COLUMNS = ("n", "hits", "truncated", "value", "se", "wilson_lo", "wilson_hi", "seed")


@dataclass
class ExperimentConfig:
    kind: str
    dimension: int
    p: float | None = None
    connectivity: str = "nn"
    rho: int = 1
    A: list | None = None
    B: list | None = None
    z: Any = None
    w: int | None = None
    x: Any = None
    r: int | None = None
    s: int | None = None
    K: int = DEFAULT_K
    M: Any = None
    n: int | None = None
    budget: int = DEFAULT_BUDGET
    master_seed: int = 0
    workers: int = 1
    out: str = "."
    paired: bool = False
    max_steps: int = DEFAULT_MAX_STEPS
    max_attempts: int = 10**9
    t_grid: list | None = None
    r_pair: list | None = None
    bracket: list | None = None
    iterations: int | None = None
    exponent: float = 2.0
    tol: float = 1e-9
    symmetric: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown field(s): {', '.join(unknown)}")
        for name in ("kind", "dimension"):
            if name not in data:
                raise ConfigError(f"missing field: {name}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown experiment kind {self.kind!r}")
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise ConfigError("dimension: must be a positive integer")
        need = list(_REQUIRED[self.kind])
        if self.kind not in _NO_P:
            need.append("p")
        missing = [f for f in need if getattr(self, f) is None]
        if missing:
            raise ConfigError(f"{self.kind}: missing field(s) {', '.join(missing)}")
        if self.p is not None and not 0 <= self.p <= 1:
            raise ConfigError("p: must lie in [0, 1]")
        for name in ("n", "budget", "workers", "iterations", "max_steps", "max_attempts"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
                raise ConfigError(f"{name}: must be a positive integer")
        for name in ("A", "B"):
            pts = getattr(self, name)
            if pts is not None:
                if not isinstance(pts, list) or not pts:
                    raise ConfigError(f"{name}: must be a nonempty list of points")
                for q in pts:
                    self._check_point(name, q)
        for name in ("z", "x"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, int):
                self._check_point(name, v)
        if self.kind != "ball_capacity" and self.kind != "cap_d4":
            try:
                self.spec()
            except ValueError as exc:
                raise ConfigError(f"graph: {exc}") from exc
        for name, length in (("r_pair", 2), ("bracket", 2)):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, list) or len(v) != length):
                raise ConfigError(f"{name}: must be a list of {length} numbers")

    def _check_point(self, name, q) -> None:
        if not isinstance(q, list) or len(q) != self.dimension or not all(
            isinstance(c, int) and not isinstance(c, bool) for c in q
        ):
            raise ConfigError(f"{name}: {q!r} is not an integer point of dimension {self.dimension}")

    def spec(self) -> GraphSpec:
        return GraphSpec(self.dimension, self.p, self.connectivity, self.rho)

    def point(self, value) -> Point | None:
        """A point, or an integer k read as k e_1."""
        if value is None:
            return None
        if isinstance(value, int):
            return unit(self.dimension, 0, value)
        return tuple(value)

    def points(self, value) -> list[Point] | None:
        return None if value is None else [tuple(q) for q in value]


@dataclass
class ResultRecord:
    config: dict
    rows: list[dict]
    summary: dict
    version: str = __version__
    elapsed: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        """Everything except the wall-clock time."""
        return {"config": self.config, "rows": self.rows, "summary": self.summary,
                "version": self.version}


def _estimate_row(est: Estimate) -> dict:
    return {
        "n": est.n, "hits": est.hits, "truncated": est.n_truncated, "value": est.value,
        "se": est.std_error, "wilson_lo": est.wilson_lo, "wilson_hi": est.wilson_hi,
    }


def _ratio_row(est: RatioEstimate) -> dict:
    num, den = est.numerator, est.denominator
    return {
        "n": num.n, "hits": num.hits, "truncated": num.n_truncated, "value": est.ratio,
        "se": est.std_error, "wilson_lo": num.wilson_lo / den.value,
        "wilson_hi": num.wilson_hi / den.value,
    }


def _fmt_point(q) -> str:
    return " ".join(str(c) for c in q)


def _fmt_set(pts) -> str:
    return ";".join(_fmt_point(q) for q in pts)


def _dispatch(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    kind = cfg.kind
    d = cfg.dimension
    seed, n, budget, workers = cfg.master_seed, cfg.n, cfg.budget, cfg.workers
    A, B = cfg.points(cfg.A), cfg.points(cfg.B)
    z = cfg.point(cfg.z)

    if kind == "ball_capacity":
        res = ball_capacity(cfg.r, d, cfg.tol, cfg.symmetric)
        row = {"r": cfg.r, "capacity": res.capacity, "converged": res.converged}
        return [row], res.to_dict()
    if kind == "cap_d4":
        res = cap_d4(A, d, cfg.tol)
        row = {"A": _fmt_set(A), "capacity": res.capacity, "converged": res.converged}
        return [row], res.to_dict()

    spec = cfg.spec()
    if kind == "tau":
        est = estimate_tau(z, spec, n, budget, seed, workers)
        return [{"z": _fmt_point(z), **_estimate_row(est)}], est.to_dict()
    if kind == "pcap":
        z = default_z(A, d) if z is None else z
        est = estimate_pcap(A, z, spec, n, budget, seed, workers, cfg.paired)
        return [{"A": _fmt_set(A), "z": _fmt_point(z), **_ratio_row(est)}], est.to_dict()
    if kind == "two_sets":
        est = estimate_two_sets(A, B, z, spec, n, budget, seed, workers)
        row = {"A": _fmt_set(A), "B": _fmt_set(B), "z": _fmt_point(z), **_ratio_row(est)}
        return [row], est.to_dict()
    if kind == "one_arm":
        est = estimate_one_arm(cfg.r, spec, n, budget, seed, workers)
        return [{"r": cfg.r, **_estimate_row(est)}], est.to_dict()
    if kind == "one_arm_set":
        est = estimate_one_arm_set(A, cfg.r, spec, n, budget, seed, workers)
        return [{"A": _fmt_set(A), "r": cfg.r, **_estimate_row(est)}], est.to_dict()
    if kind == "pioneer_tail":
        x = cfg.point(cfg.x) if cfg.x is not None else unit(d, 0, cfg.r)
        grid = cfg.t_grid or list(range(1, 4 * cfg.s**2 + 1))
        tab = pioneer_tail(cfg.r, cfg.s, x, grid, spec, n, budget, seed, workers)
        rows = [{"r": cfg.r, "s": cfg.s, "x": _fmt_point(x), **row, "n": tab.n,
                 "truncated": tab.n_truncated, "seed": seed} for row in tab.rows()]
        summary = {"n": tab.n, "n_contact": tab.n_contact, "n_truncated": tab.n_truncated,
                   "c_s2": tab.c_s2, "c_s3": tab.c_s3}
        return rows, summary
    if kind == "regularity":
        tab = regular_fraction_experiment(cfg.r, cfg.K, cfg.M, spec, n, budget, seed, workers)
        rows = [{"r": cfg.r, "K": cfg.K, "M": M, **_estimate_row(est)}
                for M, est in sorted(tab.events.items())]
        return rows, tab.to_dict()
    if kind in ("equilibrium", "ordering_equilibrium"):
        z = default_z(A, d) if z is None else z
        if kind == "equilibrium":
            res = estimate_equilibrium(A, z, spec, n, budget, cfg.max_steps, seed, workers)
        else:
            res = ordering_equilibrium(A, z, spec, n, budget, seed, workers)
        rows = [{"a": _fmt_point(a), "z": _fmt_point(z), **_ratio_row(e)}
                for a, e in zip(res.points, res.estimates)]
        rows.append({"a": "total", "z": _fmt_point(z), **_ratio_row(res.total)})
        summary = {"points": res.to_list(), "total": res.total.to_dict(),
                   "n_timeout": res.n_timeout, "n_truncated": res.n_truncated}
        return rows, summary
    if kind == "iic_hit":
        est = estimate_iic_hit(A, z, cfg.w, spec, n, budget, cfg.max_attempts, seed, workers)
        row = {"A": _fmt_set(A), "z": _fmt_point(z), "w": _fmt_point(est.w),
               **_estimate_row(est.frequency), "scaled": est.scaled, "scaled_se": est.scaled_se}
        return [row], est.to_dict()
    if kind == "calibrate_pc":
        cal = calibrate_pc(spec, tuple(cfg.r_pair), tuple(cfg.bracket), n, cfg.iterations,
                           budget, seed, workers, cfg.exponent)
        rows = [{"p": pt.p, "f": pt.f, "se": pt.se} for pt in cal.history]
        return rows, {"p_hat": cal.p, "history": rows}
    raise ConfigError(f"kind: {kind!r} has no handler")  # pragma: no cover


def run(cfg: ExperimentConfig) -> ResultRecord:
    """Run one experiment; the result depends only on the config and seed."""
    t0 = time.perf_counter()
    rows, summary = _dispatch(cfg)
    for row in rows:
        row.setdefault("seed", cfg.master_seed)
    record_cfg = cfg.to_dict()
    # worker count and output location never affect numbers, so they stay out of results
    record_cfg.pop("workers")
    record_cfg.pop("out")
    return ResultRecord(record_cfg, rows, _finite(summary), elapsed=time.perf_counter() - t0)


def _finite(obj):
    """Replace non-finite floats so the JSON stays strict."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


# -- sweeps --------------------------------------------------------------------------


def split_values(text: str) -> list:
    """Split ``v1,v2,...`` at top-level commas; each value is parsed as JSON
    when possible (so ``[1,0]`` and ``0.5`` work) and kept as text otherwise."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    vals = []
    for v in out:
        v = v.strip()
        try:
            vals.append(json.loads(v))
        except json.JSONDecodeError:
            vals.append(v)
    return vals


def parse_grid(items: list[str]) -> dict[str, list]:
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"grid: expected param=v1,v2,... but got {item!r}")
        name, values = item.split("=", 1)
        grid[name.strip()] = split_values(values)
    return grid


def sweep(template: ExperimentConfig, grid: dict[str, list]) -> list[ResultRecord]:
    """Cartesian product of runs over one or two parameters.

    Run k uses seed derive_seed(master_seed, k), except k = 0 which keeps
    the master seed so a one-point grid reproduces ``run``.
    """
    if not 1 <= len(grid) <= 2:
        raise ConfigError("grid: sweep one or two parameters")
    known = {f.name for f in fields(ExperimentConfig)}
    for name in grid:
        if name not in known or name in ("kind", "master_seed", "workers", "out"):
            raise ConfigError(f"grid: cannot sweep {name!r}")
    names = list(grid)
    records = []
    for k, combo in enumerate(itertools.product(*(grid[nm] for nm in names))):
        seed = template.master_seed if k == 0 else derive_seed(template.master_seed, k)
        cfg = replace(template, master_seed=seed, **dict(zip(names, combo)))
        try:
            cfg.validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        records.append(run(cfg))
    return records


# -- persistence -----------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(records: list[ResultRecord]) -> str:
    params: list[str] = []
    extras: list[str] = []
    for rec in records:
        for row in rec.rows:
            for key in row:
                if key in STANDARD_COLUMNS or key in params or key in extras:
                    continue
                # columns that come before the counts are parameters
                (params if _is_param(key) else extras).append(key)
    cols = ["experiment", *params, *STANDARD_COLUMNS, *extras]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, restval="", lineterminator="\n")
    writer.writeheader()
    for rec in records:
        for row in rec.rows:
            writer.writerow({"experiment": rec.config["kind"], **{k: _cell(v) for k, v in row.items()}})
    return buf.getvalue()


_PARAM_KEYS = {"A", "B", "z", "w", "x", "a", "r", "s", "K", "M", "t", "p"}


def _is_param(key: str) -> bool:
    return key in _PARAM_KEYS


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_results(records: list[ResultRecord], out_dir: str | os.PathLike, stem: str) -> dict:
    """Write ``stem.csv`` and ``stem.json`` atomically; timing goes to a
    separate ``stem.timing.json`` so result files are reproducible byte for byte."""
    out = Path(out_dir)
    paths = {"csv": out / f"{stem}.csv", "json": out / f"{stem}.json",
             "timing": out / f"{stem}.timing.json"}
    payload = [rec.to_dict() for rec in records]
    body = payload[0] if len(payload) == 1 else payload
    _atomic_write(paths["json"], json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n")
    _atomic_write(paths["csv"], _csv_text(records))
    timing = {"elapsed_seconds": [rec.elapsed for rec in records], "version": __version__}
    _atomic_write(paths["timing"], json.dumps(timing, indent=2) + "\n")
    return paths
