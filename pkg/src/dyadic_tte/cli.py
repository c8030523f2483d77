"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 enumeration budget
exceeded or degenerate draw.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import clustering as cl
from . import harness, oracle, theory
from .designs import DesignError, FullBernoulli, SubPopBernoulli, TwoStageCluster
from .dyadic_model import ParamConfig, ParamsError, generate_params, read_params, true_tte, write_params
from .estimators import DegenerateGroupError
from .graph import GraphFormatError, read_edge_list, stats, write_edge_list

WORKERS_ENV = "DYADIC_TTE_WORKERS"
EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--symmetrize", action=argparse.BooleanOptionalAction, default=None,
                   help="add the reverse of every edge (default: follow a Matrix Market banner)")
    p.add_argument("--one-based", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--skip-header", action="store_true")
    p.add_argument("--allow-self-loops", action="store_true")


def _design_args(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--design", choices=("full", "subpop", "twostage"), required=True)
    p.add_argument("--pi", type=float, default=0.5, help="treatment probability inside the experiment")
    p.add_argument("--p", type=float, default=1.0, help="in-experiment probability")
    p.add_argument("--clustering", help="clustering file (node cluster) for two-stage designs")
    p.add_argument("--mode", choices=("bernoulli-clusters", "fixed-fraction"), default="bernoulli-clusters")
    if sweep:
        p.add_argument("--pi-grid", type=_floats)
        p.add_argument("--p-grid", type=_floats)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dyadic-tte", description="Total-effect estimation from dyadic outcomes on a network.",
                     epilog=__doc__.split("\n\n", 1)[1].strip())
    parser.add_argument("--config", help="JSON file of option defaults, keyed by option name")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="node/edge counts and average degrees")
    _graph_args(p)
    p.add_argument("--out")

    p = sub.add_parser("cluster", help="Louvain clustering")
    _graph_args(p)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="clustering file to write")

    p = sub.add_parser("gen-params", help="draw edge coefficients")
    _graph_args(p)
    p.add_argument("--regime", choices=("uniform", "bernoulli", "constants"), default="uniform")
    p.add_argument("--constants", type=_floats, help="alpha,beta,gamma,zeta for --regime constants")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("synth", help="write a synthetic symmetrized graph")
    p.add_argument("--kind", choices=("erdos_renyi", "config_powerlaw"), default="config_powerlaw")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--avg-degree", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    for name, hlp in (("simulate", "Monte Carlo summary for one design"),
                      ("sweep", "Monte Carlo over a grid of pi or p")):
        p = sub.add_parser(name, help=hlp)
        _graph_args(p)
        p.add_argument("--params", required=True)
        _design_args(p, sweep=name == "sweep")
        p.add_argument("--reps", type=int, default=10000)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out")

    for name, hlp in (("theory", "closed-form expectations and biases"),
                      ("oracle", "exact expectations by enumeration"),
                      ("crosscheck", "oracle versus every closed form")):
        p = sub.add_parser(name, help=hlp)
        _graph_args(p)
        p.add_argument("--params", required=True)
        _design_args(p)
        if name == "theory":
            p.add_argument("--sigma", choices=theory.SIGMA_CHOICES, default="node")
        else:
            p.add_argument("--max-atoms", type=int, default=oracle.EnumerationBudget().max_atoms)
        p.add_argument("--out")
    return parser


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        with open(known.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                dests = {a.dest for a in sp._actions}
                sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
                # a config value satisfies a required flag
                for a in sp._actions:
                    if a.dest in cfg:
                        a.required = False
    args = parser.parse_args(argv)
    if "seed" in vars(args) and args.seed is None:
        raise UsageError(f"{args.command}: --seed is required")
    return args


@contextmanager
def _output(path: str | None):
    if path:
        with open(path, "w", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _dump(obj, path: str | None) -> None:
    with _output(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _load_graph(args):
    return read_edge_list(args.graph, one_based=args.one_based, symmetrize=args.symmetrize,
                          skip_header=args.skip_header, allow_self_loops=args.allow_self_loops)


def _load_params(args, g):
    with open(args.params) as fh:
        return read_params(fh, g)


def _load_clustering(path, n):
    with open(path) as fh:
        return cl.read_clustering(fh, n)


def _design(args, g, pi=None, p=None):
    pi = args.pi if pi is None else pi
    p = args.p if p is None else p
    if args.design == "full":
        return FullBernoulli(pi)
    if args.design == "subpop":
        return SubPopBernoulli(p, pi)
    if not args.clustering:
        raise UsageError("--clustering is required for --design twostage")
    return TwoStageCluster(p, pi, _load_clustering(args.clustering, g.n), args.mode)


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    return int(os.environ.get(WORKERS_ENV, "1"))


def cmd_stats(args):
    g = _load_graph(args)
    out = stats(g).as_dict()
    out["symmetrized"] = g.meta.get("symmetrized")
    out["duplicates_dropped"] = g.meta.get("duplicates_dropped")
    _dump(out, args.out)


def cmd_cluster(args):
    g = _load_graph(args)
    c = cl.louvain(g, args.resolution, seed=args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            cl.write_clustering(c, fh)
    ov = cl.overlap_stats(g, c)
    _dump({"k": c.k, "modularity": cl.modularity(g, c, args.resolution), "resolution": args.resolution,
           "seed": args.seed, "sigma_bar_node": ov.sigma_bar_node, "sigma_edge": ov.sigma_edge},
          None)


def cmd_gen_params(args):
    g = _load_graph(args)
    if args.regime == "constants":
        if not args.constants or len(args.constants) != 4:
            raise UsageError("--regime constants needs --constants alpha,beta,gamma,zeta")
        config = ParamConfig.constants(*args.constants)
    else:
        config = ParamConfig.named(args.regime)
    params = generate_params(g, config, args.seed)
    with _output(args.out) as fh:
        write_params(g, params, fh)


def cmd_synth(args):
    g = harness.generate_synthetic(args.kind, args.n, args.avg_degree, args.seed)
    with _output(args.out) as fh:
        write_edge_list(g, fh)


def cmd_simulate(args):
    g = _load_graph(args)
    params = _load_params(args, g)
    design = _design(args, g)
    s = harness.monte_carlo(g, params, design, args.reps, args.seed, workers=_workers(args))
    out = s.as_dict()
    wall = out.pop("wall_time")
    _dump(out, args.out)
    if args.out:
        info = harness.manifest(g, params, {"command": "simulate", **_spec(args)}, args.seed)
        info["wall_time"] = wall
        harness.write_manifest(args.out + ".manifest.json", info)


def _spec(args) -> dict:
    skip = {"command", "config", "out", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_sweep(args):
    g = _load_graph(args)
    params = _load_params(args, g)
    if args.design == "full" or args.pi_grid:
        vary, grid = "pi", args.pi_grid
    else:
        vary, grid = "p", args.p_grid
    if not grid:
        raise UsageError("sweep needs --pi-grid or --p-grid")
    clustering = None
    if args.design == "twostage":
        if not args.clustering:
            raise UsageError("--clustering is required for --design twostage")
        clustering = _load_clustering(args.clustering, g.n)
    spec = harness.SweepSpec(args.design, grid, args.reps, args.seed, vary=vary, pi=args.pi, p=args.p,
                             clustering=clustering, mode=args.mode)
    summaries = harness.sweep(g, params, spec, workers=_workers(args))
    text = harness.rows_to_csv(harness.sweep_rows(spec, summaries))
    with _output(args.out) as fh:
        fh.write(text)
    if args.out:
        info = harness.manifest(g, params, {"command": "sweep", **_spec(args), **spec.describe()}, args.seed)
        harness.write_manifest(args.out + ".manifest.json", info)


def cmd_theory(args):
    g = _load_graph(args)
    params = _load_params(args, g)
    rep = theory.expected(g, params, _design(args, g), sigma=args.sigma)
    _dump(rep.as_dict(), args.out)


def cmd_oracle(args):
    g = _load_graph(args)
    params = _load_params(args, g)
    res = oracle.exact_expectations(g, params, _design(args, g), oracle.EnumerationBudget(args.max_atoms))
    res["tau_true"] = true_tte(g, params)
    _dump(res, args.out)


def cmd_crosscheck(args):
    g = _load_graph(args)
    params = _load_params(args, g)
    rep = oracle.crosscheck(g, params, _design(args, g), oracle.EnumerationBudget(args.max_atoms))
    _dump(rep.__dict__, args.out)


COMMANDS = {
    "stats": cmd_stats, "cluster": cmd_cluster, "gen-params": cmd_gen_params, "synth": cmd_synth,
    "simulate": cmd_simulate, "sweep": cmd_sweep, "theory": cmd_theory, "oracle": cmd_oracle,
    "crosscheck": cmd_crosscheck,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = _parse(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (oracle.BudgetExceeded, DegenerateGroupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (GraphFormatError, ParamsError, cl.ClusteringError, DesignError, theory.TheoryError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
