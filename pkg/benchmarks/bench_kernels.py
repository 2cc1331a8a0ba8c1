"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--nodes 100] [--rounds 64] [--repeat 3]

Reports the best wall time per backend for the warm-up dictionary gossip and
for one dense-row mixing step, and checks that both backends return
bitwise-identical results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dtgo import kernels
from dtgo.gossip import GossipProcess, inverse_indegree_matrix
from dtgo.graphs import gilbert_graph
from dtgo.warmup import FLUSH_BELOW


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=100)
    ap.add_argument("--edge-prob", type=float, default=0.5)
    ap.add_argument("--rounds", type=int, default=64)
    ap.add_argument("--dim", type=int, default=117)
    ap.add_argument("--mix-steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    g = gilbert_graph(args.nodes, args.edge_prob, rng)
    w = GossipProcess.static(inverse_indegree_matrix(g)).matrix(0)
    wp, wi, wd = w.csr
    n = w.size
    indptr = np.arange(n + 1, dtype=np.int64)
    keys = np.arange(n, dtype=np.int64)
    vals = np.ones(n)
    z = rng.normal(size=(n, args.dim))

    print(f"graph: {n} nodes, {len(wd)} stored weights; available backends: {sorted(kernels.BACKENDS)}")
    results = {}
    for name in sorted(kernels.BACKENDS):
        k = kernels.get(name)
        t_dict, d_out = _best(lambda: k.dict_gossip(wp, wi, wd, indptr, keys, vals, n, args.rounds, FLUSH_BELOW),
                              args.repeat)

        def mix_loop():
            x = z
            for _ in range(args.mix_steps):
                x = k.csr_mix(wp, wi, wd, x)
            return x

        t_mix, m_out = _best(mix_loop, args.repeat)
        results[name] = (t_dict, t_mix, d_out, m_out)
        print(f"{name:9s} dict_gossip x{args.rounds}: {t_dict * 1e3:9.2f} ms   "
              f"csr_mix x{args.mix_steps} (d={args.dim}): {t_mix * 1e3:9.2f} ms")

    if len(results) == 2:
        py, c = results["python"], results["compiled"]
        same = all(np.array_equal(a, b) for a, b in zip(py[2], c[2])) and np.array_equal(py[3], c[3])
        print(f"speedup  dict_gossip {py[0] / c[0]:.1f}x   csr_mix {py[1] / c[1]:.1f}x   identical output: {same}")
        return 0 if same else 1
    print("compiled backend not built; nothing to compare")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
