"""Command line entry point: ``percap run``, ``percap sweep``, ``percap oracle enumerate``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .lattice import GraphSpec
from .montecarlo import AllDenominatorMisses, BracketError, Underpowered
from .oracle import TinyGraph, enumerate_box, enumerate_event
from .runner import ConfigError, ExperimentConfig, parse_grid, run, sweep, write_results

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNDERPOWERED = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")

    parser = argparse.ArgumentParser(prog="percap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run one experiment config")
    p_run.add_argument("config")

    p_sweep = sub.add_parser("sweep", parents=[common], help="run a config over a parameter grid")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--grid", action="append", required=True, metavar="PARAM=V1,V2,...")

    p_oracle = sub.add_parser("oracle", help="exact enumeration on tiny graphs")
    osub = p_oracle.add_subparsers(dest="oracle_command", required=True)
    p_enum = osub.add_parser("enumerate", parents=[common], help="all 2^E edge configurations")
    p_enum.add_argument("graph")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    over = {}
    if args.workers is not None:
        over["workers"] = args.workers
    if args.out is not None:
        over["out"] = args.out
    if args.seed is not None:
        over["master_seed"] = args.seed
    cfg = replace(cfg, **over)
    cfg.validate()
    return cfg


def _enumerate(path: str) -> dict:
    """Tiny-graph input: either a box ``{"dimension", "p", "radius", "source",
    "target"}`` or an explicit graph ``{"vertices", "edges", "p", "source", "target"}``
    with source/target as vertex indices."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if "edges" in data:
            verts = tuple(tuple(v) if isinstance(v, list) else (v,) for v in data["vertices"])
            graph = TinyGraph(verts, tuple(tuple(e) for e in data["edges"]))
            s, t = int(data["source"]), int(data["target"])
            p = float(data["p"])
            prob = enumerate_event(graph, p, lambda m, lab: lab[:, s] == lab[:, t])
            return {"connect_prob": prob, "n_edges": len(graph.edges)}
        spec = GraphSpec(int(data["dimension"]), float(data["p"]),
                         data.get("connectivity", "nn"), int(data.get("rho", 1)))
        res = enumerate_box(spec, int(data["radius"]), tuple(data["source"]), tuple(data["target"]))
        return res.to_dict()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"tiny graph: {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            result = _enumerate(args.graph)
            text = json.dumps(result, indent=2, sort_keys=True) + "\n"
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                (out / "enumerate.json").write_text(text)
            sys.stdout.write(text)
            return EXIT_OK
        cfg = _load(args)
        if args.command == "run":
            records = [run(cfg)]
            stem = cfg.kind
        else:
            records = sweep(cfg, parse_grid(args.grid))
            stem = f"{cfg.kind}_sweep"
        paths = write_results(records, cfg.out, stem)
        for key in ("csv", "json"):
            print(paths[key])
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Underpowered, BracketError, AllDenominatorMisses) as exc:
        print(f"underpowered: {exc}", file=sys.stderr)
        return EXIT_UNDERPOWERED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
