"""Command-line entry point.

Exit status: 0 on success, 1 on validation or usage errors, 2 when a run
aborts (divergence, failed warm-up).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .experiments import ExperimentError, run_experiment, spec_from_config
from .gossip import (GossipMatrix, GossipProcess, SpectralError, geometric_rate_check, inverse_indegree_matrix,
                     perron_limit, read_matrix_csv, validate_gossip_matrix)
from .graphs import DirectedGraph, GraphError, example_digraph, is_strongly_connected, read_edge_list
from .objectives import LibsvmParseError
from .optimizer import DivergenceError, corrected_gossip_demo
from .warmup import WarmupError, run_warmup


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load_matrix(args) -> GossipMatrix:
    if args.matrix_file:
        w = read_matrix_csv(Path(args.matrix_file).read_text())
        g = DirectedGraph.from_adjacency(w > 0, self_loops=False)
        return GossipMatrix(w, g)
    g = read_edge_list(Path(args.graph_file).read_text()) if args.graph_file else example_digraph()
    return inverse_indegree_matrix(g)


def cmd_analyze(args) -> int:
    w = _load_matrix(args)
    report = validate_gossip_matrix(w, w.graph)
    print(report)
    if not report.ok:
        return 1
    if not is_strongly_connected(w.graph):
        print("graph is not strongly connected", file=sys.stderr)
        return 1
    s = perron_limit(w)
    rate = geometric_rate_check(w, s, args.k_max)
    print("pi = " + " ".join(f"{p:.17g}" for p in s.pi))
    print(f"rho = {s.rho:.17g}")
    print(f"mixing_tau = {s.mixing_tau}")
    print(f"C = {rate.constant:.6g} (empirical, k <= {args.k_max})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "matrix.csv").write_text(w.to_csv())
        (out / "pi.csv").write_text("\n".join(f"{p:.17g}" for p in s.pi) + "\n")
    return 0


def cmd_warmup_demo(args) -> int:
    w = _load_matrix(args)
    process = GossipProcess.static(w)
    rng = np.random.default_rng(args.seed)
    x0 = rng.normal(0.0, np.sqrt(5.0), size=w.size)
    warm = run_warmup(process, args.warmup_rounds, rng)
    demo = corrected_gossip_demo(process, x0, args.rounds, warm.corrections)
    print(f"weighted limit  sum pi_n x_n = {demo.weighted_limit:.12g}; plain gossip ends at {demo.plain[-1].mean():.12g}")
    print(f"true mean                    = {demo.mean_limit:.12g}; corrected gossip ends at {demo.corrected[-1].mean():.12g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "warmup_demo.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["round", "node", "plain", "corrected"])
            for k in range(demo.plain.shape[0]):
                for n in range(demo.plain.shape[1]):
                    wr.writerow([k, n, f"{demo.plain[k, n]:.17g}", f"{demo.corrected[k, n]:.17g}"])
        (out / "warmup_trace.csv").write_text(warm.trace_csv())
    return 0


def cmd_run(args) -> int:
    text = Path(args.config).read_text()
    spec = spec_from_config(text, seed=args.seed, output=args.out, dataset=args.dataset)
    result = run_experiment(spec)
    for v, trace in result.curves.items():
        print(f"{spec.label(v)}: cost_subopt[{spec.rounds}] = {trace.cost_suboptimality[-1]:.6g}, "
              f"consensus_subopt[{spec.rounds}] = {trace.consensus_suboptimality[-1]:.6g}")
    if spec.output:
        print(f"wrote {len(result.curves)} curves and manifest.json to {spec.output}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    failures = run_selftest(verbose=True)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dtgo", description="Decentralized SGD on directed graphs with delays")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze-graph", help="spectral summary of a graph or matrix file")
    a.add_argument("--graph-file")
    a.add_argument("--matrix-file")
    a.add_argument("--k-max", type=int, default=100)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("warmup-demo", help="plain vs corrected gossip trajectories")
    d.add_argument("--graph-file")
    d.add_argument("--matrix-file")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--rounds", type=int, default=60)
    d.add_argument("--warmup-rounds", type=int, default=1024)
    d.add_argument("--out")
    d.set_defaults(func=cmd_warmup_demo)

    r = sub.add_parser("run", help="run an experiment sweep from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--dataset")
    r.add_argument("--graph-file", help="unused by sweeps; accepted for symmetry")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("selftest", help="run the built-in invariant checks")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"dtgo: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (GraphError, LibsvmParseError, ValueError, OSError, SpectralError) as exc:
        print(f"dtgo: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, WarmupError, ExperimentError) as exc:
        print(f"dtgo: run aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
