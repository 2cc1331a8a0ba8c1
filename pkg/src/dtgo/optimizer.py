"""Corrected decentralized SGD rounds, plus the centralized and DSGD baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .gossip import GossipMatrix, GossipProcess
from .metrics import RunTrace, compute_round_metrics
from .rng import node_streams

DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    def __init__(self, round_index: int, node: int, detail: str = ""):
        self.round_index, self.node = round_index, node
        super().__init__(f"model of node {node} diverged in round {round_index}{detail}; step size too large?")


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float
    rounds: int
    seed: int = 0
    init: str = "zeros"
    init_scale: float = 1.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.init not in ("zeros", "random"):
            raise ValueError(f"unknown init {self.init!r}")

    def initial_models(self, n: int, d: int) -> np.ndarray:
        if self.init == "zeros":
            return np.zeros((n, d))
        rng = np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, 5])
        return rng.normal(0.0, self.init_scale, size=(n, d))


def mix(w: GossipMatrix, z: np.ndarray) -> np.ndarray:
    """One gossip step ``W @ z`` through the kernel backend."""
    p, i, d = w.csr
    return kernels.csr_mix(p, i, d, z)


def dtgo_round(x: np.ndarray, grads: np.ndarray, corrections: np.ndarray, step_size: float,
               round_matrix: GossipMatrix) -> np.ndarray:
    """One round for all nodes of the (possibly extended) network.

    ``grads`` holds the real nodes' stochastic gradients; relay rows get a
    zero gradient and so pass their state through unchanged. Each node takes
    ``y = x - eta g``, scales the step as ``z = x + d (y - x)`` and then
    averages the broadcast ``z`` of its in-neighbours.
    """
    n_real = grads.shape[0]
    y = x.copy()
    y[:n_real] -= step_size * grads
    z = x + corrections[:, None] * (y - x)
    return mix(round_matrix, z)


def dsgd_round(x: np.ndarray, grads: np.ndarray, step_size: float, round_matrix: GossipMatrix) -> np.ndarray:
    """Textbook decentralized SGD: ``x+ = W (x - eta g)``."""
    z = x.copy()
    z[: grads.shape[0]] -= step_size * grads
    return mix(round_matrix, z)


def weighted_average(states: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """``sum_n pi_n x_n``."""
    return np.asarray(pi, dtype=np.float64) @ np.asarray(states, dtype=np.float64)


def _guard(x: np.ndarray, k: int) -> None:
    norms = np.linalg.norm(x, axis=1)
    bad = ~np.isfinite(norms) | (norms > DIVERGENCE_NORM)
    if bad.any():
        n = int(np.flatnonzero(bad)[0])
        raise DivergenceError(k, n, f" (||x|| = {norms[n]:.3g})")


def run_dtgo(config: OptimizerConfig, process: GossipProcess, objectives, corrections: np.ndarray,
             baseline: RunTrace | None = None, n_eff: int | None = None, pi: np.ndarray | None = None,
             record_models: bool = False, dsgd: bool = False) -> RunTrace:
    """Run ``config.rounds`` rounds and record metrics for every round.

    ``n_eff`` is the node count the corrections were built from (default:
    the number of real nodes); the descent-identity residual compares the
    weighted-average step against ``(eta / n_eff) * sum_n g_n``. With
    ``dsgd`` the corrections are ignored and the plain DSGD update is used.
    """
    n_real, n_total = process.n_real, process.n_total
    if objectives.n_nodes != n_real:
        raise ValueError(f"{objectives.n_nodes} objectives for {n_real} real nodes")
    n_eff = n_real if n_eff is None else n_eff
    pi = process.spectral.pi if pi is None else pi
    corrections = np.asarray(corrections, dtype=np.float64)
    eta = config.step_size
    rngs = node_streams(config.seed, "sampling", n_real)
    x = np.zeros((n_total, objectives.dim))
    x[:n_real] = config.initial_models(n_real, objectives.dim)
    trace = RunTrace.empty(config.rounds)
    models = [x[:n_real].copy()] if record_models else None
    xt = weighted_average(x, pi)
    wavg = [xt] if record_models else None
    trace.set_row(compute_round_metrics(x[:n_real], objectives, xt, baseline, 0), 0.0, objectives.global_value(xt))
    for k in range(config.rounds):
        g = objectives.stochastic_gradients(x[:n_real], objectives.draw(rngs))
        w = process.matrix(k)
        x = dsgd_round(x, g, eta, w) if dsgd else dtgo_round(x, g, corrections, eta, w)
        _guard(x, k)
        xt_new = weighted_average(x, pi)
        drift = float(np.max(np.abs(xt_new - xt + (eta / n_eff) * g.sum(axis=0))))
        xt = xt_new
        if record_models:
            models.append(x[:n_real].copy())
            wavg.append(xt)
        trace.set_row(compute_round_metrics(x[:n_real], objectives, xt, baseline, k + 1), drift,
                      objectives.global_value(xt))
    if record_models:
        trace.models = np.stack(models)
        trace.weighted_averages = np.stack(wavg)
    return trace


def run_dsgd(config: OptimizerConfig, process: GossipProcess, objectives, **kw) -> RunTrace:
    return run_dtgo(config, process, objectives, np.ones(process.n_total), dsgd=True, **kw)


def centralized_sgd(config: OptimizerConfig, objectives, record_models: bool = False) -> RunTrace:
    """Single model stepping along the mean of all nodes' stochastic gradients.

    Uses the same per-node sampling streams as :func:`run_dtgo` with the same
    seed, so traces are paired draw for draw.
    """
    n, d = objectives.n_nodes, objectives.dim
    rngs = node_streams(config.seed, "sampling", n)
    x = config.initial_models(n, d).mean(axis=0)
    eta = config.step_size
    trace = RunTrace.empty(config.rounds)
    models = [x.copy()]

    def row(k, x):
        stacked = np.tile(x, (n, 1))
        m = compute_round_metrics(stacked, objectives, x, None, k)
        trace.set_row(m, 0.0, m.cost)

    row(0, x)
    for k in range(config.rounds):
        stacked = np.tile(x, (n, 1))
        g = objectives.stochastic_gradients(stacked, objectives.draw(rngs))
        x = x - eta * g.mean(axis=0)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            raise DivergenceError(k, 0)
        if record_models:
            models.append(x.copy())
        row(k + 1, x)
    trace.cost_suboptimality[:] = 0.0
    trace.consensus_suboptimality[:] = 0.0
    if record_models:
        trace.models = np.stack(models)[:, None, :]
    return trace


@dataclass
class GossipDemo:
    plain: np.ndarray  # (rounds + 1, N)
    corrected: np.ndarray
    weighted_limit: float
    mean_limit: float


def corrected_gossip_demo(process: GossipProcess, x0: np.ndarray, rounds: int,
                          corrections: np.ndarray) -> GossipDemo:
    """Plain gossip from ``x0`` next to corrected gossip from ``D x0``.

    The plain run settles on ``sum pi_n x0_n``, the corrected one on the
    true mean of ``x0``.
    """
    n = process.n_real
    x0 = np.asarray(x0, dtype=np.float64)
    plain = np.zeros((rounds + 1, process.n_total))
    corr = np.zeros_like(plain)
    plain[0, :n] = x0
    corr[0, :n] = corrections[:n] * x0
    for k in range(rounds):
        w = process.matrix(k)
        plain[k + 1] = mix(w, plain[k][:, None])[:, 0]
        corr[k + 1] = mix(w, corr[k][:, None])[:, 0]
    pi = process.spectral.pi
    return GossipDemo(plain[:, :n], corr[:, :n], float(pi[:n] @ x0), float(x0.mean()))
