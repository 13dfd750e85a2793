"""Command-line interface: ``stochroute <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .centralized import ConvergenceParams, route_with_table, solve
from .decentralized import DecentralizedRouter
from .distributions import TimeGrid
from .errors import ConfigError, ConvergenceError, StochRouteError
from .experiments import (ALGORITHMS, ExperimentConfig, NETWORK_STREAM, NetworkSource, config_from_dict,
                          load_config, run_distance_analysis, run_experiment, run_scaling_benchmark,
                          seed_sequence)
from .spatial_graph import (SpatialNetwork, WeightRule, generate_kleinberg_variant, load_tntp,
                            lognormal_from_columns, write_tntp)

log = logging.getLogger("stochroute")


def _pair(text: str):
    """``"3,4"`` -> (3.0, 4.0); ``"17"`` -> 17 (node id)."""
    parts = text.split(",")
    try:
        if len(parts) == 2:
            return float(parts[0]), float(parts[1])
        if len(parts) == 1:
            return int(parts[0])
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected a node id or 'x,y', got {text!r}")


def _node(net: SpatialNetwork, spec) -> int:
    return net.node_at(*spec) if isinstance(spec, tuple) else net.check_node(spec)


def _add_network_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network")
    g.add_argument("--side", type=int, default=10, help="lattice side of a generated network (default 10)")
    g.add_argument("--nodes", help="TNTP node file (use with --edges instead of generating)")
    g.add_argument("--edges", help="TNTP edge file")
    g.add_argument("--coord-scale", type=float, default=1.0)
    g.add_argument("--length-scale", type=float, default=1.0)
    g.add_argument("--weights-from-file", action="store_true",
                   help="read mu/sigma columns from the edge file instead of drawing them")


def _network(args) -> SpatialNetwork:
    if bool(args.nodes) != bool(args.edges):
        raise ConfigError("--nodes and --edges must be given together")
    ss = seed_sequence(args.seed, NETWORK_STREAM)
    if args.nodes:
        rule = WeightRule(seed=int(ss.generate_state(1)[0]), coord_scale=args.coord_scale,
                          length_scale=args.length_scale,
                          mapper=lognormal_from_columns if args.weights_from_file else None)
        return load_tntp(args.nodes, args.edges, rule)
    return generate_kleinberg_variant(args.side, np.random.default_rng(ss))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    net = _network(args)
    out = _out_dir(args)
    write_tntp(net, out / "nodes.tntp", out / "edges.tntp")
    print(f"wrote {net.n} nodes and {net.m} edges to {out}")
    return 0


def cmd_solve(args) -> int:
    net = _network(args)
    target = _node(net, args.target)
    grid = TimeGrid.for_horizon(args.horizon, args.bins)
    table = solve(net, target, grid, ConvergenceParams(args.epsilon, args.max_iterations, args.tie_tolerance))
    out = _out_dir(args)
    path = out / "routing_table.npz"
    np.savez_compressed(path, cdf=table.cdf, successor=table.successor, bin_width=grid.bin_width,
                        target=target, iterations=table.iterations, residual=table.residual)
    print(f"converged in {table.iterations} iterations (gap {table.residual:.3g}); wrote {path}")
    return 0


def cmd_route(args) -> int:
    net = _network(args)
    origin, target = _node(net, args.origin), _node(net, args.target)
    grid = TimeGrid.for_horizon(args.horizon or args.budget, args.bins)
    params = ConvergenceParams(args.epsilon, args.max_iterations, args.tie_tolerance)
    rng = np.random.default_rng(args.seed)
    if args.algorithm == "centralized":
        rec = route_with_table(net, solve(net, target, grid, params), origin, args.budget,
                               args.criterion, args.theta, rng)
    else:
        router = DecentralizedRouter(net, target, grid, params, args.algorithm.split("-", 1)[1])
        rec = router.route(origin, args.budget, args.theta, args.criterion, rng)
    print(json.dumps({"origin": rec.origin, "target": rec.target, "budget": rec.budget,
                      "success": rec.success, "travel_time": rec.travel_time, "reason": rec.reason,
                      "steps": rec.step_count, "path": rec.path}))
    return 0


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.master_seed = args.seed
    if getattr(args, "trials", None) is not None:
        cfg.trials = args.trials
    return cfg.validate()


def cmd_experiment(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    result = run_experiment(cfg, _out_dir(args), threads=args.threads)
    for f in result.files:
        print(f"wrote {f}")
    return 0


def cmd_distance(args) -> int:
    if args.config:
        cfg = _apply_overrides(load_config(args.config), args)
    else:
        if bool(args.nodes) != bool(args.edges):
            raise ConfigError("--nodes and --edges must be given together")
        net_src = (NetworkSource("tntp", nodes=args.nodes, edges=args.edges, coord_scale=args.coord_scale,
                                 length_scale=args.length_scale)
                   if args.nodes else NetworkSource("kleinberg", side=args.side))
        cfg = config_from_dict({"experiment": "distance", "master_seed": args.seed or 0,
                                "metrics": args.metric, "bootstrap": args.bootstrap})
        cfg.network = net_src
        cfg.validate()
    result = run_distance_analysis(cfg, _out_dir(args))
    for metric, fit in result.extra["fits"].items():
        print(f"{metric}: pairs={fit.n_pairs} excluded={fit.n_excluded} rho={fit.pearson_rho:.4f} "
              f"intercept={fit.model.intercept:.4f} slope={fit.model.slope:.4f}")
    return 0


def cmd_bench(args) -> int:
    if args.config:
        cfg = _apply_overrides(load_config(args.config), args)
    else:
        cfg = config_from_dict({"experiment": "scaling", "sides": args.sides, "runs": args.runs,
                                "budgets": [args.budget], "thetas": [args.theta],
                                "algorithms": args.algorithms, "bins": args.bins, "epsilon": args.epsilon,
                                "master_seed": args.seed or 0})
    result = run_scaling_benchmark(cfg, _out_dir(args))
    for alg, (k, se, _) in result.extra["exponents"].items():
        print(f"{alg}: exponent {k:.3f} +/- {se:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochroute",
                                     description="Routing on spatial networks with random travel times.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default: Optional[int] = 0):
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--threads", type=int, default=1)

    def solver_args(p):
        p.add_argument("--horizon", type=float, default=150.0)
        p.add_argument("--bins", type=int, default=1000)
        p.add_argument("--epsilon", type=float, default=1e-3)
        p.add_argument("--max-iterations", type=int, default=1000)
        p.add_argument("--tie-tolerance", type=float, default=0.0,
                       help="treat neighbor CDF values within this of the best as ties (default exact)")

    p = sub.add_parser("generate", help="generate a lattice network with shortcuts and write TNTP files")
    _add_network_args(p)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="compute the centralized routing table toward a target")
    _add_network_args(p)
    common(p)
    solver_args(p)
    p.add_argument("--target", type=_pair, required=True, help="node id or 'x,y'")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("route", help="simulate one routing attempt and print it as JSON")
    _add_network_args(p)
    common(p)
    solver_args(p)
    p.set_defaults(horizon=None)
    p.add_argument("--origin", type=_pair, required=True)
    p.add_argument("--target", type=_pair, required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--theta", type=float, default=0.8)
    p.add_argument("--criterion", choices=["fan", "frank", "joint"], default="joint")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="centralized")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("experiment", help="run an experiment described by a YAML config")
    p.add_argument("config")
    common(p, seed_default=None)
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("distance-analysis", help="metric vs network distance statistics")
    p.add_argument("config", nargs="?")
    _add_network_args(p)
    common(p, seed_default=None)
    p.add_argument("--metric", nargs="+", default=["euclidean", "lattice"], choices=["euclidean", "lattice"])
    p.add_argument("--bootstrap", type=int, default=200)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("bench-scaling", help="time routing versus network size and fit exponents")
    p.add_argument("config", nargs="?")
    common(p, seed_default=None)
    p.add_argument("--sides", type=int, nargs="+", default=[5, 10, 15, 20, 25])
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--budget", type=float, default=50.0)
    p.add_argument("--theta", type=float, default=0.8)
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=["centralized", "decentralized-LE"])
    p.add_argument("--bins", type=int, default=500)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"stochroute: config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"stochroute: {exc}", file=sys.stderr)
        return 3
    except (StochRouteError, ValueError, KeyError, OSError) as exc:
        print(f"stochroute: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
