"""Command-line front end.

Exit codes: 0 success/converged, 1 input error, 2 solver hit --max-outer,
3 comparison or verification failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import (
    build_manifest,
    config_from_manifest,
    flows_for_network,
    read_flows,
    read_manifest,
    to_dot,
    write_flows,
    write_manifest,
    write_trace,
)
from .network import InputError, bundled_path, parse_demands, parse_network, validate
from .oracles import (
    check_conservation,
    check_demand_satisfaction,
    check_loading_agreement,
    check_reverse_structure,
)
from .probit import make_rng
from .solvers import SolverConfig, compare_solutions, solve

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_MISMATCH = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _nonnegative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a number") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not an integer") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def resolve_input(path: str) -> Path:
    """A local file, or else a bundled data file of the same name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = bundled_path(p.name)
    if bundled.is_file():
        return Path(str(bundled))
    raise InputError(f"no such file: {path}")


def _load_problem(network_arg: str, demands_arg: str):
    net_path, dem_path = resolve_input(network_arg), resolve_input(demands_arg)
    network = parse_network(net_path.read_text(encoding="utf-8"))
    demands = parse_demands(dem_path.read_text(encoding="utf-8"))
    problems = validate(network, demands)
    if problems:
        raise InputError(problems[0] if len(problems) == 1 else f"{problems[0]} (+{len(problems) - 1} more)")
    return network, demands, net_path, dem_path


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=["physarum", "msa"], default="physarum")
    p.add_argument("--gamma", type=_positive_float, default=0.3, help="perception variance scale")
    p.add_argument("--epsilon", type=_positive_float, default=0.1, help="outer stopping tolerance")
    p.add_argument("--inner", type=_positive_int, default=1, help="Monte Carlo draws per outer iteration")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--max-outer", type=_positive_int, default=100_000)
    p.add_argument("--metric", choices=["root_abs_sum", "euclidean"], default="root_abs_sum")
    p.add_argument("--cost-flows", choices=["averaged", "auxiliary"], default="averaged",
                   help="Physarum: flows that drive the length update")


def cmd_solve(args) -> int:
    if args.from_manifest:
        manifest = read_manifest(args.from_manifest)
        network, demands, net_path, dem_path = _load_problem(manifest["network"], manifest["demands"])
        config = config_from_manifest(manifest)
        out = args.out or manifest.get("outputs", {}).get("flows")
        trace = args.trace or manifest.get("outputs", {}).get("trace")
    else:
        if not (args.network and args.demands):
            raise InputError("--network and --demands are required (or --from-manifest)")
        network, demands, net_path, dem_path = _load_problem(args.network, args.demands)
        config = SolverConfig(
            gamma=args.gamma,
            epsilon0=args.epsilon,
            inner_iterations=args.inner,
            seed=args.seed,
            max_outer=args.max_outer,
            solver_kind=args.solver,
            metric=args.metric,
            cost_flows=args.cost_flows,
        )
        out, trace = args.out, args.trace
    if not out:
        raise InputError("--out is required")
    trace = trace or str(Path(out).with_suffix(".trace.csv"))
    manifest_path = args.manifest or str(Path(out).with_suffix(".manifest.json"))

    solution = solve(network, demands, config)
    write_flows(out, network, solution.link_flows)
    write_trace(trace, solution, timing=args.timing)
    write_manifest(
        manifest_path,
        build_manifest(net_path, dem_path, config, {"flows": out, "trace": trace}, __version__),
    )
    status = "converged" if solution.converged else "max-outer reached"
    print(
        f"solver={config.solver_kind} outer_iterations={solution.outer_iterations} "
        f"final_epsilon={solution.epsilon_trace[-1]:.6g} elapsed={solution.elapsed:.3f}s "
        f"truncations={solution.truncation_count} status={status}"
    )
    return EXIT_OK if solution.converged else EXIT_NOT_CONVERGED


def cmd_compare(args) -> int:
    keys_a, xa = read_flows(args.a)
    keys_b, xb = read_flows(args.b)
    if set(keys_a) != set(keys_b) or len(keys_a) != len(keys_b):
        raise InputError("flows files cover different link sets")
    lookup = dict(zip(keys_b, xb))
    xb = np.array([lookup[k] for k in keys_a])
    diff, worst = compare_solutions(xa, xb)
    print("from,to,a,b,abs_diff")
    for (i, j), va, vb, d in zip(keys_a, xa, xb, diff):
        print(f"{i},{j},{va:.4f},{vb:.4f},{d:.4f}")
    ok = worst <= args.tol
    print(f"max_abs_diff={worst:.6g} tol={args.tol:g} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_verify(args) -> int:
    network, demands, _, _ = _load_problem(args.network, args.demands)
    keys, values = read_flows(args.flows)
    flows = flows_for_network(network, keys, values)
    checks = [
        check_conservation(network, demands, flows, args.tol),
        check_demand_satisfaction(network, demands, flows, args.tol),
        check_reverse_structure(network, flows, args.reverse_threshold),
        check_loading_agreement(
            network, demands, flows, args.gamma, args.draws, make_rng(args.seed)
        ),
    ]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_MISMATCH


def cmd_export_dot(args) -> int:
    network = parse_network(resolve_input(args.network).read_text(encoding="utf-8"))
    flows = None
    if args.flows:
        keys, values = read_flows(args.flows)
        flows = flows_for_network(network, keys, values)
    text = to_dot(network, flows)
    if args.dot:
        Path(args.dot).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .network import example_demands, sheffi12

    network = sheffi12()
    demands = example_demands(args.example)
    inner = args.inner if args.inner else (1 if args.example == 1 else 10)
    results = {}
    for kind in ("msa", "physarum"):
        cfg = SolverConfig(inner_iterations=inner, seed=args.seed, solver_kind=kind, max_outer=args.max_outer)
        results[kind] = solve(network, demands, cfg)
    _, worst = compare_solutions(results["msa"], results["physarum"])
    print(f"example {args.example}: inner={inner} seed={args.seed}")
    for kind, sol in results.items():
        flag = "" if sol.converged else " (max-outer reached)"
        print(f"  {kind}: outer_iterations={sol.outer_iterations} elapsed={sol.elapsed:.3f}s{flag}")
    print("from,to,msa,physarum")
    for link, a, b in zip(network.links, results["msa"].link_flows, results["physarum"].link_flows):
        print(f"{link.from_node},{link.to_node},{a:.4f},{b:.4f}")
    print(f"max_abs_diff={worst:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="physarum-sue", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run a solver and write flows, trace and manifest")
    p.add_argument("--network")
    p.add_argument("--demands")
    _solver_flags(p)
    p.add_argument("--out", help="flows CSV")
    p.add_argument("--trace", help="trace CSV (default: <out>.trace.csv)")
    p.add_argument("--manifest", help="manifest JSON (default: <out>.manifest.json)")
    p.add_argument("--from-manifest", help="rerun the configuration recorded in a manifest")
    p.add_argument("--timing", action="store_true", help="record wall time in the trace (not reproducible)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="compare two flows files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=_nonnegative_float, default=0.0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="check a flows file against conservation and probit loading")
    p.add_argument("--network", required=True)
    p.add_argument("--demands", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--gamma", type=_positive_float, default=0.3)
    p.add_argument("--tol", type=_nonnegative_float, default=0.1,
                   help="conservation and demand-satisfaction tolerance")
    p.add_argument("--reverse-threshold", type=_nonnegative_float, default=0.05)
    p.add_argument("--draws", type=_positive_int, default=50_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-dot", help="write the network (and optional flows) as Graphviz DOT")
    p.add_argument("--network", required=True)
    p.add_argument("--flows")
    p.add_argument("--dot", help="output path (default: stdout)")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("reproduce", help="run both solvers on a bundled example")
    p.add_argument("--example", type=int, choices=[1, 2], default=1)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--inner", type=_positive_int)
    p.add_argument("--max-outer", type=_positive_int, default=100_000)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"physarum-sue {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
