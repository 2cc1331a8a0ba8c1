"""Gossip matrices, delay extension with relay nodes, and spectral limits."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .graphs import DirectedGraph, GraphError, GraphSchedule, is_strongly_connected, sample_round_graph

ROW_SUM_TOL = 1e-12
LIMIT_TOL = 1e-13
POSITIVITY_TOL = 1e-14


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GossipMatrix:
    weights: np.ndarray
    graph: DirectedGraph

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row-wise in-neighbour lists (ascending) with their weights."""
        indptr = np.zeros(self.size + 1, dtype=np.int64)
        indices, data = [], []
        for n, srcs in enumerate(self.graph.in_neighbors):
            indices.extend(srcs)
            data.extend(self.weights[n, list(srcs)].tolist())
            indptr[n + 1] = len(indices)
        return indptr, np.asarray(indices, dtype=np.int64), np.asarray(data, dtype=np.float64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        np.savetxt(buf, self.weights, delimiter=",", fmt="%.17g")
        return buf.getvalue()


def read_matrix_csv(text: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.float64))


def inverse_indegree_matrix(g: DirectedGraph) -> GossipMatrix:
    """Each node weighs every in-neighbour (itself included) by ``1/in_degree``."""
    if not g.self_loops:
        raise GraphError("inverse in-degree weights need a graph with self-loops")
    w = np.zeros((g.n_nodes, g.n_nodes))
    for n, srcs in enumerate(g.in_neighbors):
        w[n, list(srcs)] = 1.0 / len(srcs)
    return GossipMatrix(w, g)


@dataclass
class ValidationReport:
    row_sum_failures: list[int] = field(default_factory=list)
    support_failures: list[tuple[int, int]] = field(default_factory=list)
    diagonal_failures: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.row_sum_failures or self.support_failures or self.diagonal_failures)

    def __str__(self) -> str:
        if self.ok:
            return "gossip matrix: row-stochastic, support matches graph, positive diagonal"
        parts = []
        if self.row_sum_failures:
            parts.append(f"(i) rows not summing to one: {self.row_sum_failures}")
        if self.support_failures:
            parts.append(f"(ii) entries inconsistent with edges: {self.support_failures}")
        if self.diagonal_failures:
            parts.append(f"(iii) non-positive diagonal at: {self.diagonal_failures}")
        return "; ".join(parts)


def validate_gossip_matrix(w, g: DirectedGraph, relay: np.ndarray | None = None) -> ValidationReport:
    """Check row-stochasticity, edge support/non-negativity and positive diagonal.

    Nodes flagged in ``relay`` are exempt from the diagonal clause: delay
    relays forward what they received and keep nothing.
    """
    w = np.asarray(getattr(w, "weights", w), dtype=np.float64)
    if w.shape != (g.n_nodes, g.n_nodes):
        raise ValueError(f"matrix shape {w.shape} does not match a {g.n_nodes}-node graph")
    report = ValidationReport()
    sums = w.sum(axis=1)
    report.row_sum_failures = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL).tolist()
    adj = g.adjacency()
    bad = (w < 0) | ((w > 0) != adj)
    report.support_failures = [(int(n), int(m)) for n, m in zip(*np.nonzero(bad))]
    diag_bad = np.diag(w) <= 0
    if relay is not None:
        diag_bad &= ~np.asarray(relay, dtype=bool)
    report.diagonal_failures = np.flatnonzero(diag_bad).tolist()
    return report


def _delay_items(g: DirectedGraph, delays: Mapping[tuple[int, int], int]) -> list[tuple[tuple[int, int], int]]:
    items = []
    for (src, dst), ell in sorted(delays.items()):
        ell = int(ell)
        if ell < 0:
            raise GraphError(f"negative delay on edge {src}->{dst}")
        if ell == 0:
            continue
        if src == dst:
            raise GraphError(f"delay on self-loop {src}->{src} is not supported")
        if not g.has_edge(src, dst):
            raise GraphError(f"delayed edge {src}->{dst} is not in the graph")
        items.append(((int(src), int(dst)), ell))
    return items


@dataclass(frozen=True, eq=False)
class DelayedNetwork:
    """Original matrix plus the extension with relay chains for delayed edges.

    Real nodes keep indices ``0..N-1``; relay nodes follow in the order the
    delayed edges sort, each chain listed from the sender side.
    """

    original: GossipMatrix
    delays: dict
    extended: GossipMatrix
    is_virtual: np.ndarray
    chains: dict

    @property
    def n_real(self) -> int:
        return self.original.size

    @property
    def n_total(self) -> int:
        return self.extended.size

    def extend_round(self, w: GossipMatrix) -> GossipMatrix:
        """Apply this network's relay chains to a round matrix over the real nodes.

        Edges absent from ``w.graph`` in this round lose only their final hop;
        relays keep forwarding whatever is in flight.
        """
        return _extend(w, self.chains, self.n_total)


def _extend(w: GossipMatrix, chains: Mapping[tuple[int, int], list[int]], n_total: int) -> GossipMatrix:
    n = w.size
    big = np.zeros((n_total, n_total))
    big[:n, :n] = w.weights
    incoming: list[set[int]] = [set(s) for s in w.graph.in_neighbors] + [set() for _ in range(n_total - n)]
    for (src, dst), chain in chains.items():
        prev = src
        for v in chain:
            big[v, prev] = 1.0
            incoming[v].add(prev)
            prev = v
        if w.graph.has_edge(src, dst):
            big[dst, chain[-1]] = big[dst, src]
            big[dst, src] = 0.0
            incoming[dst].discard(src)
            incoming[dst].add(chain[-1])
    graph = DirectedGraph(n_total, tuple(tuple(sorted(s)) for s in incoming), self_loops=False)
    return GossipMatrix(big, graph)


def extend_with_delays(w: GossipMatrix, delays: Mapping[tuple[int, int], int]) -> DelayedNetwork:
    """Replace each delayed edge ``src -> dst`` (delay ``l``) with a chain of ``l`` relays.

    The relays carry weight one from their predecessor; the original weight
    ``W[dst, src]`` moves to the last relay.
    """
    items = _delay_items(w.graph, delays)
    n = w.size
    chains, nxt = {}, n
    for edge, ell in items:
        chains[edge] = list(range(nxt, nxt + ell))
        nxt += ell
    extended = _extend(w, chains, nxt) if chains else w
    is_virtual = np.zeros(nxt, dtype=bool)
    is_virtual[n:] = True
    return DelayedNetwork(w, dict(items), extended, is_virtual, chains)


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    pi: np.ndarray
    rho: float
    mixing_tau: int
    limit: np.ndarray
    squarings: int

    @property
    def lambda2(self) -> float:
        return float(np.sqrt(self.rho))


def limit_matrix(w: np.ndarray, max_squarings: int = 2**10) -> tuple[np.ndarray, int]:
    """``lim W^k`` by repeated squaring until the max-norm change drops below ``LIMIT_TOL``."""
    p = np.array(w, dtype=np.float64)
    for i in range(1, max_squarings + 1):
        q = p @ p
        if np.max(np.abs(q - p)) < LIMIT_TOL:
            return q, i
        p = q
    raise SpectralError(f"powers did not converge after {max_squarings} squarings; matrix is not primitive")


def second_eigenvalue_modulus(w: np.ndarray) -> float:
    if w.shape[0] == 1:
        return 0.0
    mods = np.sort(np.abs(np.linalg.eigvals(w)))[::-1]
    return float(mods[1])


def perron_limit(w: GossipMatrix | np.ndarray, tau_cap: int = 100_000) -> SpectralSummary:
    """Stationary weights ``pi``, ``rho = |lambda_2|^2`` and the mixing time.

    ``mixing_tau`` is the first ``k`` for which ``||W^k - W^inf||_2^2 < 1``.
    """
    mat = np.asarray(getattr(w, "weights", w), dtype=np.float64)
    lim, squarings = limit_matrix(mat)
    spread = np.max(np.abs(lim - lim[0]))
    if spread > 1e-10:
        raise SpectralError(f"limit rows differ by {spread:.3g}; matrix has no unique stationary row")
    pi = lim.mean(axis=0)
    pi = pi / pi.sum()
    inf = np.tile(pi, (mat.shape[0], 1))
    rho = second_eigenvalue_modulus(mat) ** 2
    tau, pk = 0, np.eye(mat.shape[0])
    while True:
        tau += 1
        pk = pk @ mat
        if np.linalg.norm(pk - inf, 2) ** 2 < 1.0:
            break
        if tau >= tau_cap:
            raise SpectralError(f"mixing time exceeds {tau_cap}")
    return SpectralSummary(pi, rho, tau, inf, squarings)


@dataclass(frozen=True, eq=False)
class RateCheck:
    norms: np.ndarray  # ||W^k - W^inf||_2^2 for k = 1..k_max
    constant: float
    slope: float  # fitted log-slope per round over the above-floor range
    floor: float

    def holds(self, rho: float) -> bool:
        k = np.arange(1, len(self.norms) + 1)
        return bool(np.all(self.norms <= self.constant * rho**k * (1 + 1e-9) + self.floor))


def geometric_rate_check(w: GossipMatrix | np.ndarray, summary: SpectralSummary, k_max: int = 100,
                         floor: float = 1e-24, fit_from: int = 10) -> RateCheck:
    """Norm sequence and the smallest ``C`` with ``norm_k <= C rho^k`` on ``1..k_max``.

    Terms at or below ``floor`` are rounding noise of the limit itself and are
    left out of the fit. The constant is a lower bound for any valid ``C``.
    """
    mat = np.asarray(getattr(w, "weights", w), dtype=np.float64)
    norms = np.empty(k_max)
    pk = np.eye(mat.shape[0])
    for k in range(k_max):
        pk = pk @ mat
        norms[k] = np.linalg.norm(pk - summary.limit, 2) ** 2
    ks = np.arange(1, k_max + 1)
    live = norms > floor
    if summary.rho <= 0.0 or not live.any():
        return RateCheck(norms, 0.0, float("-inf"), floor)
    constant = float(np.max(np.exp(np.log(norms[live]) - ks[live] * np.log(summary.rho))))
    fit = live & (ks >= fit_from)
    if fit.sum() >= 2:
        slope = float(np.polyfit(ks[fit], np.log(norms[fit]), 1)[0])
    else:
        slope = float("nan")
    return RateCheck(norms, constant, slope, floor)


def rounds_for_accuracy(summary: SpectralSummary, rate: RateCheck, target: float) -> int:
    """Smallest ``K`` with ``C rho^K < target`` (at least 1)."""
    if rate.constant <= 0.0 or summary.rho <= 0.0:
        return 1
    k = (np.log(target) - np.log(rate.constant)) / np.log(summary.rho)
    return max(1, int(np.floor(k)) + 1)


class GossipProcess:
    """Per-round gossip matrices over the (possibly delay-extended) node set.

    Round weights are inverse in-degree on the round graph ``G[k]``; delay
    chains are fixed by ``delays`` on the base graph.
    """

    def __init__(self, schedule: GraphSchedule, delays: Mapping[tuple[int, int], int] | None = None,
                 base_matrix: GossipMatrix | None = None):
        self.schedule = schedule
        base = base_matrix if base_matrix is not None else inverse_indegree_matrix(schedule.base)
        self.network = extend_with_delays(base, delays or {})
        self._self_loop_matrix = None

    @classmethod
    def static(cls, w: GossipMatrix, delays=None) -> "GossipProcess":
        return cls(GraphSchedule(w.graph), delays, base_matrix=w)

    @property
    def n_real(self) -> int:
        return self.network.n_real

    @property
    def n_total(self) -> int:
        return self.network.n_total

    @property
    def is_virtual(self) -> np.ndarray:
        return self.network.is_virtual

    @property
    def is_static(self) -> bool:
        return self.schedule.is_static

    def matrix(self, k: int) -> GossipMatrix:
        if self.is_static:
            return self.network.extended
        g = sample_round_graph(self.schedule, k)
        if g is self.schedule.base:
            return self.network.extended
        if self.schedule.mode == "local-steps":
            if self._self_loop_matrix is None:
                self._self_loop_matrix = self.network.extend_round(inverse_indegree_matrix(g))
            return self._self_loop_matrix
        return self.network.extend_round(inverse_indegree_matrix(g))

    def expected_matrix(self) -> np.ndarray:
        """``E[W[k]]`` for one round (the per-period product for local steps).

        For edge drops with inverse in-degree weights the expectation is exact:
        a node with ``b`` incoming non-self edges, each kept with probability
        ``q``, gives a kept neighbour weight ``q E[1/(2+B)]`` and itself
        ``E[1/(1+B')]`` with ``B ~ Bin(b-1, q)`` and ``B' ~ Bin(b, q)``.
        """
        s = self.schedule
        if s.is_static:
            return self.network.extended.weights
        if s.mode == "local-steps":
            w = self.network.extended.weights
            eye_w = self.matrix(1).weights
            prod = w.copy()
            for _ in range(s.period - 1):
                prod = eye_w @ prod
            return prod
        from scipy.stats import binom

        q = 1.0 - s.p_err
        n = s.base.n_nodes
        ew = np.zeros((n, n))
        for dst, srcs in enumerate(s.base.in_neighbors):
            b = len(srcs) - 1
            j = np.arange(b + 1)
            ew[dst, dst] = float(np.sum(binom.pmf(j, b, q) / (1.0 + j)))
            if b > 0:
                jj = np.arange(b)
                nb = q * float(np.sum(binom.pmf(jj, b - 1, q) / (2.0 + jj)))
                for src in srcs:
                    if src != dst:
                        ew[dst, src] = nb
        return self.network.extend_round(GossipMatrix(ew, s.base)).weights

    @cached_property
    def spectral(self) -> SpectralSummary:
        """Stationary weights of the process (of ``E[W]`` when time-varying)."""
        if self.is_static:
            return perron_limit(self.network.extended)
        return perron_limit(self.expected_matrix())

    def check_connected(self) -> None:
        if not is_strongly_connected(self.schedule.base):
            raise GraphError("base graph is not strongly connected")
