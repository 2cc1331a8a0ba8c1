"""Warm-up gossip on sparse dictionaries: each node learns N and its own pi.

Every node starts with ``{id: 1}``. Repeated weighted averaging of the
dictionaries drives node ``n``'s entry for ``id_m`` to ``pi_m``, so after the
warm-up a node reads the network size from the number of keys and its
correction weight from its own entry.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import kernels
from .gossip import POSITIVITY_TOL, GossipMatrix, GossipProcess

FLUSH_BELOW = 1e-300


class WarmupError(RuntimeError):
    pass


def generate_node_id(rng: np.random.Generator) -> int:
    """Random 128-bit identifier."""
    return int.from_bytes(rng.bytes(16), "big")


@dataclass(frozen=True)
class WarmupResult:
    n_estimated: int
    pi_self: float
    correction: float
    rounds_used: int


def warmup_round(states: list[dict], round_graph, weights: GossipMatrix) -> list[dict]:
    """One synchronous round: node ``n`` takes ``sum_m W[n, m] * dict_m``.

    Keys missing from a neighbour count as zero. Neighbours are visited in
    ascending index order.
    """
    w = weights.weights
    new = []
    for n, srcs in enumerate(round_graph.in_neighbors):
        acc: dict = {}
        for m in srcs:
            c = w[n, m]
            for key, v in states[m].items():
                if key in acc:
                    acc[key] += c * v
                else:
                    acc[key] = c * v
        new.append({k: (x if x >= FLUSH_BELOW else 0.0) for k, x in acc.items()})
    return new


def finalize_warmup(d: dict, own_id, rounds_used: int = 0, n_override: int | None = None) -> WarmupResult:
    """Read ``N`` (the key count) and ``pi_n`` (own entry) off a converged dictionary."""
    if own_id not in d:
        raise WarmupError("own id missing from dictionary")
    pi_self = float(d[own_id])
    if pi_self < POSITIVITY_TOL:
        raise WarmupError(
            f"own weight {pi_self:.3g} is below {POSITIVITY_TOL}; warm-up too short or graph not strongly connected"
        )
    n_est = len(d) if n_override is None else n_override
    return WarmupResult(n_est, pi_self, 1.0 / (n_est * pi_self), rounds_used)


@dataclass
class WarmupOutcome:
    results: list[WarmupResult]  # real nodes only
    corrections: np.ndarray  # one entry per node of the extended network; relays get 1
    ids: list[int]
    dictionaries: list[dict]
    trace: list[tuple[int, int, int, float]]

    @property
    def n_used(self) -> int:
        """Key count the real nodes used to build their corrections."""
        counts = {r.n_estimated for r in self.results}
        return counts.pop() if len(counts) == 1 else -1

    def trace_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["round", "node", "key_count", "pi_self"])
        for row in self.trace:
            wr.writerow([row[0], row[1], row[2], repr(row[3])])
        return buf.getvalue()


def _to_csr(states: list[dict], key_index: dict):
    indptr = np.zeros(len(states) + 1, dtype=np.int64)
    keys, vals = [], []
    for n, d in enumerate(states):
        for k, v in d.items():
            keys.append(key_index[k])
            vals.append(v)
        indptr[n + 1] = len(keys)
    return indptr, np.asarray(keys, dtype=np.int64), np.asarray(vals, dtype=np.float64)


def _from_csr(indptr, keys, vals, ids: list):
    return [
        {ids[k]: v for k, v in zip(keys[indptr[n]:indptr[n + 1]].tolist(), vals[indptr[n]:indptr[n + 1]].tolist())}
        for n in range(len(indptr) - 1)
    ]


def _record(trace, k, indptr, keys, vals, own_keys, n_real):
    for n in range(n_real):
        a, b = indptr[n], indptr[n + 1]
        hit = np.flatnonzero(keys[a:b] == own_keys[n])
        trace.append((k, n, int(b - a), float(vals[a + hit[0]]) if hit.size else 0.0))


def run_warmup(process: GossipProcess, k_warmup: int, rng: np.random.Generator | None = None,
               virtual_ids_visible: bool = False, trace_every: int = 0, backend: str | None = None) -> WarmupOutcome:
    """Run the warm-up for ``k_warmup`` rounds over every node of ``process``.

    Relay nodes forward dictionaries exactly as they forward models. With
    ``virtual_ids_visible`` they also start with an id of their own, so real
    nodes count relays in ``N``; otherwise relays start empty and only real
    ids circulate. Relay corrections are fixed to 1. ``k_warmup = 0`` leaves
    every node with ``N = 1`` and ``d = 1``.
    """
    if k_warmup < 0:
        raise ValueError("k_warmup must be non-negative")
    rng = rng if rng is not None else np.random.default_rng(0)
    kern = kernels.get(backend)
    n_total, n_real = process.n_total, process.n_real
    holders = n_total if virtual_ids_visible else n_real
    ids = [generate_node_id(rng) for _ in range(holders)]
    if len(set(ids)) != len(ids):
        raise WarmupError("node id collision")
    key_index = {i: j for j, i in enumerate(ids)}
    states = [{ids[n]: 1.0} for n in range(holders)] + [{} for _ in range(n_total - holders)]
    indptr, keys, vals = _to_csr(states, key_index)
    own_keys = np.arange(n_real)
    trace: list = []
    if trace_every:
        _record(trace, 0, indptr, keys, vals, own_keys, n_real)
    k = 0
    while k < k_warmup:
        if process.is_static:
            # run straight to the next trace point in one kernel call
            step = k_warmup - k if not trace_every else min(trace_every - k % trace_every, k_warmup - k)
            wp, wi, wd = process.matrix(k).csr
        else:
            step = 1
            wp, wi, wd = process.matrix(k).csr
        indptr, keys, vals = kern.dict_gossip(wp, wi, wd, indptr, keys, vals, len(ids), step, FLUSH_BELOW)
        k += step
        if trace_every and (k % trace_every == 0 or k == k_warmup):
            _record(trace, k, indptr, keys, vals, own_keys, n_real)
    dicts = _from_csr(indptr, keys, vals, ids)
    results = [finalize_warmup(dicts[n], ids[n], k_warmup) for n in range(n_real)]
    corrections = np.ones(n_total)
    corrections[:n_real] = [r.correction for r in results]
    return WarmupOutcome(results, corrections, ids, dicts, trace)


def spectral_corrections(process: GossipProcess, n_count: int | None = None) -> np.ndarray:
    """Corrections ``1/(N pi_n)`` straight from the stationary weights (diagnostic)."""
    pi = process.spectral.pi
    n = process.n_real if n_count is None else n_count
    d = np.ones(process.n_total)
    d[: process.n_real] = 1.0 / (n * pi[: process.n_real])
    return d
