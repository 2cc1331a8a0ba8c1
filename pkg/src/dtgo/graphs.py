"""Directed communication graphs and round-by-round topology schedules."""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph on nodes ``0..n_nodes-1`` stored by receiver.

    ``in_neighbors[n]`` is the sorted tuple of nodes ``m`` with an edge
    ``m -> n``. When ``self_loops`` is true every node carries ``(n, n)``;
    delay-extended graphs set it to false because relay nodes have no
    self-reception.
    """

    n_nodes: int
    in_neighbors: tuple[tuple[int, ...], ...]
    self_loops: bool = True
    _edge_set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise GraphError("a graph needs at least one node")
        if len(self.in_neighbors) != self.n_nodes:
            raise GraphError("in_neighbors must have one entry per node")
        edges = set()
        for dst, srcs in enumerate(self.in_neighbors):
            for src in srcs:
                if not 0 <= src < self.n_nodes:
                    raise GraphError(f"edge {src}->{dst} references a node outside 0..{self.n_nodes - 1}")
                edges.add((src, dst))
            if self.self_loops and dst not in srcs:
                raise GraphError(f"node {dst} is missing its self-loop")
        object.__setattr__(self, "_edge_set", frozenset(edges))

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int]], self_loops: bool = True) -> "DirectedGraph":
        incoming: list[set[int]] = [set() for _ in range(n_nodes)]
        for src, dst in edges:
            src, dst = int(src), int(dst)
            if not (0 <= src < n_nodes and 0 <= dst < n_nodes):
                raise GraphError(f"edge {src}->{dst} references a node outside 0..{n_nodes - 1}")
            incoming[dst].add(src)
        if self_loops:
            for n in range(n_nodes):
                incoming[n].add(n)
        return cls(n_nodes, tuple(tuple(sorted(s)) for s in incoming), self_loops)

    @classmethod
    def from_adjacency(cls, adj: np.ndarray, self_loops: bool = True) -> "DirectedGraph":
        """Build from a boolean matrix with ``adj[dst, src]`` true for ``src -> dst``."""
        adj = np.asarray(adj, dtype=bool)
        n = adj.shape[0]
        rows = []
        for dst in range(n):
            srcs = set(np.flatnonzero(adj[dst]).tolist())
            if self_loops:
                srcs.add(dst)
            rows.append(tuple(sorted(srcs)))
        return cls(n, tuple(rows), self_loops)

    @property
    def edges(self) -> frozenset:
        return self._edge_set

    def has_edge(self, src: int, dst: int) -> bool:
        return (src, dst) in self._edge_set

    def in_degree(self, n: int) -> int:
        return len(self.in_neighbors[n])

    def non_self_edges(self) -> list[tuple[int, int]]:
        return sorted(e for e in self._edge_set if e[0] != e[1])

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``A[dst, src]`` set for every edge."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for dst, srcs in enumerate(self.in_neighbors):
            a[dst, list(srcs)] = True
        return a

    def out_neighbors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for dst, srcs in enumerate(self.in_neighbors):
            for src in srcs:
                out[src].append(dst)
        return out

    def to_edge_list(self) -> str:
        """Serialize as ``N`` followed by one ``src dst`` line per non-self edge."""
        lines = [str(self.n_nodes)]
        lines += [f"{s} {d}" for s, d in self.non_self_edges()]
        return "\n".join(lines) + "\n"

    def permuted(self, perm: np.ndarray) -> "DirectedGraph":
        """Relabel node ``i`` as ``perm[i]``."""
        return DirectedGraph.from_edges(
            self.n_nodes, ((int(perm[s]), int(perm[d])) for s, d in self._edge_set), self.self_loops
        )


def read_edge_list(source: str | TextIO) -> DirectedGraph:
    """Parse the edge-list text format. Self-loops are implied and may also be listed."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    lines = [ln.split("#", 1)[0].strip() for ln in stream]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphError("empty edge list")
    try:
        n = int(lines[0])
        edges = []
        for i, ln in enumerate(lines[1:], start=2):
            parts = ln.split()
            if len(parts) != 2:
                raise GraphError(f"line {i}: expected 'src dst', got {ln!r}")
            edges.append((int(parts[0]), int(parts[1])))
    except ValueError as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"malformed edge list: {exc}") from None
    return DirectedGraph.from_edges(n, edges)


def reachable(neighbors: list[list[int]] | tuple, start: int) -> np.ndarray:
    seen = np.zeros(len(neighbors), dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in neighbors[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def is_strongly_connected(g: DirectedGraph) -> bool:
    """Two-pass reachability from node 0: forward along out-edges, then backward."""
    if g.n_nodes == 1:
        return True
    if not reachable(g.out_neighbors(), 0).all():
        return False
    return bool(reachable(g.in_neighbors, 0).all())


def complete_graph(n: int) -> DirectedGraph:
    return DirectedGraph(n, tuple(tuple(range(n)) for _ in range(n)))


def self_loop_graph(n: int) -> DirectedGraph:
    return DirectedGraph(n, tuple((i,) for i in range(n)))


def ring_digraph(n: int) -> DirectedGraph:
    """Directed cycle ``0 -> 1 -> ... -> n-1 -> 0`` with self-loops."""
    return DirectedGraph.from_edges(n, ((i, (i + 1) % n) for i in range(n)))


def bidirectional_ring(n: int) -> DirectedGraph:
    edges = [(i, (i + 1) % n) for i in range(n)] + [((i + 1) % n, i) for i in range(n)]
    return DirectedGraph.from_edges(n, edges)


def example_digraph() -> DirectedGraph:
    """The five-node directed example graph, relabelled to 0-based indices.

    Edges (1-based): 3->4, 4->2, 2->3, 2->1, 1->3, 5->3, 3->5.
    """
    one_based = [(3, 4), (4, 2), (2, 3), (2, 1), (1, 3), (5, 3), (3, 5)]
    return DirectedGraph.from_edges(5, ((s - 1, d - 1) for s, d in one_based))


def gilbert_graph(n: int, p: float, rng: np.random.Generator, max_tries: int = 10_000) -> DirectedGraph:
    """Draw a strongly connected directed G(n, p) graph with all self-loops.

    Every ordered pair ``(src, dst)`` with ``src != dst`` is included
    independently with probability ``p``; draws that are not strongly
    connected are discarded.
    """
    if n < 1:
        raise GraphError("n must be at least 1")
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"p must lie in [0, 1], got {p}")
    off_diag = ~np.eye(n, dtype=bool)
    for _ in range(max_tries):
        adj = (rng.random((n, n)) < p) & off_diag
        g = DirectedGraph.from_adjacency(adj)
        if is_strongly_connected(g):
            return g
    raise GraphError(
        f"no strongly connected G({n}, {p}) draw in {max_tries} tries; p is too small for n={n}"
    )


SCHEDULE_MODES = ("static", "edge-drop", "local-steps")


@dataclass(frozen=True)
class GraphSchedule:
    """Sequence of round graphs ``G[k]`` derived from a base graph.

    ``static`` repeats the base; ``edge-drop`` removes each non-self edge
    independently with probability ``p_err`` in every round; ``local-steps``
    communicates over the base every ``period`` rounds and uses only
    self-loops in between.
    """

    base: DirectedGraph
    mode: str = "static"
    p_err: float = 0.0
    period: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SCHEDULE_MODES:
            raise GraphError(f"unknown schedule mode {self.mode!r}")
        if not 0.0 <= self.p_err <= 1.0:
            raise GraphError("p_err must lie in [0, 1]")
        if self.period < 1:
            raise GraphError("period must be at least 1")

    @property
    def is_static(self) -> bool:
        return (
            self.mode == "static"
            or (self.mode == "edge-drop" and self.p_err == 0.0)
            or (self.mode == "local-steps" and self.period == 1)
        )


def sample_round_graph(s: GraphSchedule, k: int) -> DirectedGraph:
    """Graph used in round ``k``; a pure function of ``(s, k)``."""
    if k < 0:
        raise ValueError("round index must be non-negative")
    if s.mode == "static":
        return s.base
    if s.mode == "local-steps":
        return s.base if k % s.period == 0 else self_loop_graph(s.base.n_nodes)
    if s.p_err == 0.0:
        return s.base
    edges = s.base.non_self_edges()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([s.seed & 0xFFFFFFFFFFFFFFFF, 0x5EED, k])))
    keep = rng.random(len(edges)) >= s.p_err
    return DirectedGraph.from_edges(s.base.n_nodes, (e for e, kept in zip(edges, keep) if kept))
