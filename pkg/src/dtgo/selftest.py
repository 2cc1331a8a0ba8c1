"""Quick invariant suite behind ``dtgo selftest`` (a few seconds, no data files)."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import kernels
from .gossip import (GossipProcess, extend_with_delays, geometric_rate_check, inverse_indegree_matrix,
                     perron_limit, validate_gossip_matrix)
from .graphs import example_digraph, gilbert_graph, ring_digraph
from .metrics import RunTrace
from .objectives import QuadraticObjectives
from .optimizer import OptimizerConfig, run_dtgo
from .warmup import run_warmup


def _check_example_pi():
    s = perron_limit(inverse_indegree_matrix(example_digraph()))
    want = np.array([1, 2, 2, 2, 1]) / 8
    assert np.allclose(s.pi, want, atol=1e-12), s.pi


def _check_delay_extension():
    w = inverse_indegree_matrix(example_digraph())
    net = extend_with_delays(w, {(3, 1): 2})
    e = net.extended.weights
    assert e.shape == (7, 7)
    assert e[1, 6] == 0.5 and e[5, 3] == 1.0 and e[6, 5] == 1.0
    assert validate_gossip_matrix(net.extended, net.extended.graph, net.is_virtual).ok
    pi = perron_limit(net.extended).pi
    assert np.allclose(pi, [0.1, 0.2, 0.2, 0.2, 0.1, 0.1, 0.1], atol=1e-12), pi


def _check_rational_weights():
    w = inverse_indegree_matrix(example_digraph()).weights
    for v in w.ravel():
        assert Fraction(float(v)).limit_denominator(8) == Fraction(float(v))


def _check_warmup():
    rng = np.random.default_rng(7)
    for _ in range(5):
        g = gilbert_graph(12, 0.3, rng)
        proc = GossipProcess.static(inverse_indegree_matrix(g))
        s = proc.spectral
        rate = geometric_rate_check(proc.matrix(0), s)
        k = max(64, int(np.ceil(np.log(1e-20 / max(rate.constant, 1e-300)) / np.log(s.rho)))) if s.rho > 0 else 64
        out = run_warmup(proc, k, rng)
        assert all(r.n_estimated == 12 for r in out.results)
        assert np.allclose([r.pi_self for r in out.results], s.pi, atol=1e-8)


def _check_backends_agree():
    if "compiled" not in kernels.BACKENDS:
        return
    g = gilbert_graph(15, 0.25, np.random.default_rng(3))
    proc = GossipProcess.static(inverse_indegree_matrix(g), {e: 1 for e in g.non_self_edges()[:6]})
    a = run_warmup(proc, 200, np.random.default_rng(1), backend="python")
    b = run_warmup(proc, 200, np.random.default_rng(1), backend="compiled")
    assert np.array_equal(a.corrections, b.corrections)
    z = np.random.default_rng(2).normal(size=(proc.n_total, 3))
    p, i, d = proc.matrix(0).csr
    assert np.array_equal(kernels.get("python").csr_mix(p, i, d, z), kernels.get("compiled").csr_mix(p, i, d, z))


def _check_descent_identity():
    g = ring_digraph(8)
    proc = GossipProcess.static(inverse_indegree_matrix(g), {(0, 1): 2, (4, 5): 1})
    obj = QuadraticObjectives(np.random.default_rng(4).normal(size=(8, 3)), 1.0)
    warm = run_warmup(proc, 4000, np.random.default_rng(5))
    trace = run_dtgo(OptimizerConfig(0.05, 100, seed=9), proc, obj, warm.corrections, n_eff=warm.n_used)
    assert np.max(trace.weighted_avg_drift) < 1e-9, np.max(trace.weighted_avg_drift)


def _check_csv_round_trip():
    g = ring_digraph(4)
    proc = GossipProcess.static(inverse_indegree_matrix(g))
    obj = QuadraticObjectives(np.random.default_rng(6).normal(size=(4, 2)), 0.5)
    trace = run_dtgo(OptimizerConfig(0.1, 20, seed=1), proc, obj, np.ones(4) / (4 * proc.spectral.pi))
    assert RunTrace.from_csv(trace.to_csv()).equals(trace)


CHECKS = [
    ("example graph stationary weights", _check_example_pi),
    ("delay extension of the example graph", _check_delay_extension),
    ("inverse in-degree weights are exact", _check_rational_weights),
    ("warm-up recovers N and pi", _check_warmup),
    ("compiled and python kernels agree", _check_backends_agree),
    ("weighted-average descent identity with delays", _check_descent_identity),
    ("trace CSV round trip", _check_csv_round_trip),
]


def run_selftest(verbose: bool = False) -> int:
    """Run every check; return the number of failures."""
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
            status = "ok"
        except AssertionError as exc:
            failures += 1
            status = f"FAILED {exc}"
        if verbose:
            print(f"{status[:6]:6s} {name}" + (f": {status[7:]}" if status != "ok" else ""))
    if verbose:
        print(f"backend: {kernels.BACKEND}; {len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
