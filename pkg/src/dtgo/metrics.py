"""Per-round cost and consensus metrics and the CSV run trace."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

COLUMNS = (
    "round",
    "cost",
    "consensus",
    "cost_suboptimality",
    "consensus_suboptimality",
    "weighted_avg_drift",
    "g_weighted",
    "weighted_avg_cost",
)


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    cost: float
    consensus: float
    cost_subopt: float
    consensus_subopt: float
    g_weighted: float


def consensus_distance(x: np.ndarray, center: np.ndarray) -> float:
    r = x - center
    return float(np.mean(np.einsum("ij,ij->i", r, r)))


def compute_round_metrics(x_real: np.ndarray, objectives, x_tilde: np.ndarray, baseline: "RunTrace | None",
                          round: int) -> RoundMetrics:
    """Metrics over the real nodes' models ``x_real`` (shape ``(N, d)``).

    ``cost`` is the mean of ``f_n(x_n)``; ``consensus`` the mean squared
    distance to the plain average and ``g_weighted`` to the weighted average
    ``x_tilde``. Suboptimality is against ``baseline`` at the same round.
    """
    cost = float(np.mean(objectives.node_values(x_real)))
    cons = consensus_distance(x_real, x_real.mean(axis=0))
    g = consensus_distance(x_real, x_tilde)
    if baseline is None:
        b_cost, b_cons = np.nan, np.nan
    else:
        b_cost, b_cons = baseline.cost[round], baseline.consensus[round]
    return RoundMetrics(round, cost, cons, cost - b_cost, cons - b_cons, g)


@dataclass(eq=False)
class RunTrace:
    """Metric columns indexed by round ``0..K`` (row 0 is the initial state).

    ``weighted_avg_drift[k]`` is the infinity-norm residual of the
    weighted-average descent identity for the step ``k-1 -> k``.
    """

    round: np.ndarray
    cost: np.ndarray
    consensus: np.ndarray
    cost_suboptimality: np.ndarray
    consensus_suboptimality: np.ndarray
    weighted_avg_drift: np.ndarray
    g_weighted: np.ndarray
    weighted_avg_cost: np.ndarray
    models: np.ndarray | None = field(default=None, repr=False)
    weighted_averages: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def empty(cls, rounds: int) -> "RunTrace":
        n = rounds + 1
        cols = {c: np.full(n, np.nan) for c in COLUMNS}
        cols["round"] = np.arange(n)
        cols["weighted_avg_drift"][0] = 0.0
        return cls(**cols)

    def __len__(self) -> int:
        return len(self.round)

    def set_row(self, m: RoundMetrics, drift: float, weighted_cost: float) -> None:
        k = m.round
        self.cost[k] = m.cost
        self.consensus[k] = m.consensus
        self.cost_suboptimality[k] = m.cost_subopt
        self.consensus_suboptimality[k] = m.consensus_subopt
        self.g_weighted[k] = m.g_weighted
        self.weighted_avg_drift[k] = drift
        self.weighted_avg_cost[k] = weighted_cost

    def with_baseline(self, baseline: "RunTrace") -> "RunTrace":
        out = RunTrace(**{c: np.array(getattr(self, c), dtype=float) for c in COLUMNS})
        out.round = self.round.copy()
        out.cost_suboptimality = self.cost - baseline.cost
        out.consensus_suboptimality = self.consensus - baseline.consensus
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(COLUMNS)
        for k in range(len(self)):
            row = [int(self.round[k])] + [format(float(getattr(self, c)[k]), ".17g") for c in COLUMNS[1:]]
            wr.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunTrace":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected trace columns {header}")
        cols = {c: np.array([float(r[i]) for r in body]) for i, c in enumerate(COLUMNS)}
        cols["round"] = cols["round"].astype(np.int64)
        return cls(**cols)

    def equals(self, other: "RunTrace") -> bool:
        return all(np.array_equal(getattr(self, c), getattr(other, c), equal_nan=True) for c in COLUMNS)


def average_traces(traces: list[RunTrace]) -> RunTrace:
    """Pointwise mean across replications, summed in list order."""
    if not traces:
        raise ValueError("nothing to average")
    cols = {c: np.mean(np.stack([getattr(t, c) for t in traces]), axis=0) for c in COLUMNS}
    cols["round"] = traces[0].round.copy()
    return RunTrace(**cols)

