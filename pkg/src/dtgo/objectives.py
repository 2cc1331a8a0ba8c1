"""Local objectives, LIBSVM ingestion and sample partitioning.

Objective sets are vectorized over nodes: methods take a stacked ``(N, d)``
array of node models and return per-node values or gradients.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
from scipy.special import expit


class LibsvmParseError(ValueError):
    pass


@dataclass(eq=False)
class Dataset:
    """Sparse samples with labels in {-1, +1}; feature indices are 1-based."""

    indices: list[np.ndarray]
    values: list[np.ndarray]
    labels: np.ndarray
    dim: int
    _dense: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.indices) != len(self.labels) or len(self.values) != len(self.labels):
            raise ValueError("sample and label counts differ")
        if self.labels.size and not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset) or len(self) != len(other) or self.dim != other.dim:
            return False
        return bool(np.array_equal(self.labels, other.labels)) and all(
            np.array_equal(a, b) and np.array_equal(u, v)
            for a, b, u, v in zip(self.indices, other.indices, self.values, other.values)
        )

    def dense(self) -> np.ndarray:
        """``(n_samples, dim)`` feature matrix; column ``j`` holds feature ``j+1``."""
        if self._dense is None:
            a = np.zeros((len(self), self.dim))
            for i, (ix, v) in enumerate(zip(self.indices, self.values)):
                a[i, ix - 1] = v
            self._dense = a
        return self._dense

    def standardized(self) -> "Dataset":
        """Columns divided by their standard deviation; no centring, so sparsity is kept.

        Constant columns are left unscaled.
        """
        std = self.dense().std(axis=0)
        scale = np.where(std > 0, std, 1.0)
        vals = [v / scale[ix - 1] for ix, v in zip(self.indices, self.values)]
        return Dataset([ix.copy() for ix in self.indices], vals, self.labels.copy(), self.dim)

    @classmethod
    def from_dense(cls, a: np.ndarray, labels: np.ndarray) -> "Dataset":
        a = np.asarray(a, dtype=np.float64)
        idx = [np.flatnonzero(row) + 1 for row in a]
        vals = [a[i, ix - 1] for i, ix in enumerate(idx)]
        return cls(idx, vals, np.asarray(labels, dtype=np.float64), a.shape[1])


def _map_labels(raw: list[float]) -> np.ndarray:
    y = np.asarray(raw, dtype=np.float64)
    present = set(np.unique(y).tolist())
    if present <= {-1.0, 1.0}:
        return y
    if present <= {1.0, 2.0}:
        return np.where(y == 1.0, 1.0, -1.0)
    if present <= {0.0, 1.0}:
        return np.where(y == 1.0, 1.0, -1.0)
    raise LibsvmParseError(f"cannot map labels {sorted(present)} to +-1")


def parse_libsvm(source: str | TextIO | Iterable[str]) -> Dataset:
    """Parse ``<label> (<index>:<value>)*`` lines.

    Binary label sets are mapped to +-1: ``{1, 2}`` as 1 -> +1, 2 -> -1 (the
    mushrooms convention) and ``{0, 1}`` as 0 -> -1. Duplicate indices on a
    line are rejected; unsorted ones are accepted.
    """
    lines = io.StringIO(source) if isinstance(source, str) else source
    labels, indices, values = [], [], []
    dim = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise LibsvmParseError(f"line {lineno}: bad label {tokens[0]!r}") from None
        ix = np.empty(len(tokens) - 1, dtype=np.int64)
        vx = np.empty(len(tokens) - 1, dtype=np.float64)
        for t, tok in enumerate(tokens[1:]):
            key, sep, val = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                ix[t] = int(key)
                vx[t] = float(val)
            except ValueError:
                raise LibsvmParseError(f"line {lineno}: malformed token {tok!r}") from None
            if ix[t] < 1:
                raise LibsvmParseError(f"line {lineno}: feature index {ix[t]} is below 1")
        if len(np.unique(ix)) != len(ix):
            raise LibsvmParseError(f"line {lineno}: duplicate feature index")
        if ix.size:
            dim = max(dim, int(ix.max()))
        indices.append(ix)
        values.append(vx)
    y = _map_labels(labels) if labels else np.zeros(0)
    return Dataset(indices, values, y, dim)


def load_libsvm(path) -> Dataset:
    with open(path, "r", encoding="ascii") as fh:
        return parse_libsvm(fh)


def write_libsvm(ds: Dataset) -> str:
    out = []
    for y, ix, vx in zip(ds.labels, ds.indices, ds.values):
        feats = " ".join(f"{i}:{v!r}" for i, v in zip(ix.tolist(), vx.tolist()))
        out.append(f"{int(y):+d} {feats}".rstrip())
    return "\n".join(out) + ("\n" if out else "")


def partition_uniform(n_samples: int | Dataset, n_nodes: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random near-equal split; the first ``n_samples % n_nodes`` shards get one extra sample."""
    if isinstance(n_samples, Dataset):
        n_samples = len(n_samples)
    if n_nodes < 1:
        raise ValueError("n_nodes must be at least 1")
    if n_nodes > n_samples:
        warnings.warn(f"{n_nodes} nodes for {n_samples} samples leaves some shards empty", stacklevel=2)
    perm = rng.permutation(n_samples)
    return [np.sort(s) for s in np.array_split(perm, n_nodes)]


def shard_manifest_csv(shards: list[np.ndarray]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["node", "sample_index"])
    for n, s in enumerate(shards):
        for i in s.tolist():
            wr.writerow([n, i])
    return buf.getvalue()


def logistic_value(x: np.ndarray, features: np.ndarray, labels: np.ndarray, lam: float) -> float:
    """Mean logistic loss over the rows plus ``lam/2 ||x||^2``."""
    x = np.asarray(x, dtype=np.float64)
    loss = 0.0
    if len(labels):
        loss = float(np.mean(np.logaddexp(0.0, -labels * (features @ x))))
    return loss + 0.5 * lam * float(x @ x)


def logistic_stochastic_gradient(x: np.ndarray, features: np.ndarray, labels: np.ndarray,
                                 batch: np.ndarray, lam: float) -> np.ndarray:
    """Mean of ``-y sigmoid(-y <x, s>) s`` over ``batch`` plus ``lam x``."""
    batch = np.asarray(batch)
    if batch.size == 0:
        raise ValueError("batch must be non-empty")
    s, y = features[batch], labels[batch]
    coef = -y * expit(-y * (s @ x))
    return coef @ s / batch.size + lam * x


class LogisticObjectives:
    """l2-regularized logistic regression with one data shard per node."""

    def __init__(self, data: Dataset, shards: list[np.ndarray], lam: float, batch_size: int = 1):
        self.features = data.dense()
        self.labels = data.labels
        self.shards = [np.asarray(s, dtype=np.int64) for s in shards]
        self.lam = float(lam)
        self.batch_size = int(batch_size)
        self.n_nodes = len(shards)
        self.dim = data.dim
        self._sizes = np.array([len(s) for s in self.shards], dtype=np.float64)
        yfeat = self.features * self.labels[:, None]
        self._blocks = [np.ascontiguousarray(yfeat[s]) for s in self.shards]
        self._used = np.concatenate(self.shards) if self.shards else np.empty(0, np.int64)
        self._yfeat_used = np.ascontiguousarray(yfeat[self._used])

    def _shard_losses(self, margins_of) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        for n, block in enumerate(self._blocks):
            if len(block):
                out[n] = np.mean(np.logaddexp(0.0, -margins_of(n, block)))
        return out

    def node_values(self, x: np.ndarray) -> np.ndarray:
        """``f_n(x_n)`` for each node given stacked models ``x`` of shape ``(N, d)``."""
        x = np.asarray(x, dtype=np.float64)
        loss = self._shard_losses(lambda n, block: block @ x[n])
        return loss + 0.5 * self.lam * np.einsum("ij,ij->i", x, x)

    def global_value(self, x: np.ndarray) -> float:
        """``(1/N) sum_n f_n(x)`` at a single model."""
        x = np.asarray(x, dtype=np.float64)
        margins = self._yfeat_used @ x
        bounds = np.concatenate([[0], np.cumsum(self._sizes).astype(np.int64)])
        loss = self._shard_losses(lambda n, block: margins[bounds[n]:bounds[n + 1]])
        return float(np.mean(loss) + 0.5 * self.lam * (x @ x))

    def full_gradients(self, x: np.ndarray) -> np.ndarray:
        g = np.empty_like(x, dtype=np.float64)
        for n, s in enumerate(self.shards):
            g[n] = logistic_stochastic_gradient(x[n], self.features, self.labels, s, self.lam) if len(s) else self.lam * x[n]
        return g

    def draw(self, rngs: list[np.random.Generator]) -> np.ndarray:
        """Sample indices (with replacement) for one round, shape ``(N, batch)``."""
        b = self.batch_size
        out = np.empty((self.n_nodes, b), dtype=np.int64)
        for n, (r, s) in enumerate(zip(rngs, self.shards)):
            out[n] = s[r.integers(0, len(s), size=b)] if len(s) else -1
        return out

    def stochastic_gradients(self, x: np.ndarray, draws: np.ndarray) -> np.ndarray:
        s = self.features[draws]  # (N, b, d)
        y = self.labels[draws]
        m = y * np.einsum("nbd,nd->nb", s, x)
        coef = -y * expit(-m)
        g = np.einsum("nb,nbd->nd", coef, s) / draws.shape[1] + self.lam * x
        empty = draws[:, 0] < 0
        if empty.any():
            g[empty] = self.lam * x[empty]
        return g


class QuadraticObjectives:
    """``f_n(x) = 0.5 ||x - c_n||^2`` with optional additive gradient noise.

    ``noise_var`` is the total variance ``E||noise||^2`` spread evenly over
    the coordinates.
    """

    def __init__(self, centers: np.ndarray, noise_var: float = 0.0):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        self.n_nodes, self.dim = self.centers.shape
        self.noise_var = float(noise_var)

    @property
    def minimizer(self) -> np.ndarray:
        return self.centers.mean(axis=0)

    @property
    def optimal_value(self) -> float:
        return self.global_value(self.minimizer)

    def node_values(self, x: np.ndarray) -> np.ndarray:
        r = x - self.centers
        return 0.5 * np.einsum("ij,ij->i", r, r)

    def global_value(self, x: np.ndarray) -> float:
        r = x[None, :] - self.centers
        return float(0.5 * np.mean(np.einsum("ij,ij->i", r, r)))

    def full_gradients(self, x: np.ndarray) -> np.ndarray:
        return x - self.centers

    def draw(self, rngs: list[np.random.Generator]) -> np.ndarray:
        if self.noise_var == 0.0:
            return np.zeros((self.n_nodes, self.dim))
        std = np.sqrt(self.noise_var / self.dim)
        return np.stack([r.normal(0.0, std, size=self.dim) for r in rngs])

    def stochastic_gradients(self, x: np.ndarray, draws: np.ndarray) -> np.ndarray:
        return x - self.centers + draws


def heterogeneity_noise_diagnostics(objectives, x_star: np.ndarray, rng: np.random.Generator,
                                    n_mc: int = 2000) -> tuple[float, float]:
    """Heterogeneity ``mean_n ||grad f_n(x*)||^2`` and noise ``mean_n E||grad F_n - grad f_n||^2`` at ``x*``.

    The noise term is a Monte-Carlo average over ``n_mc`` fresh draws per node.
    """
    x = np.tile(np.asarray(x_star, dtype=np.float64), (objectives.n_nodes, 1))
    full = objectives.full_gradients(x)
    zeta2 = float(np.mean(np.einsum("ij,ij->i", full, full)))
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(int(rng.integers(2**63))).spawn(objectives.n_nodes)]
    acc = np.zeros(objectives.n_nodes)
    for _ in range(n_mc):
        dev = objectives.stochastic_gradients(x, objectives.draw(rngs)) - full
        acc += np.einsum("ij,ij->i", dev, dev)
    return zeta2, float(np.mean(acc / n_mc))


def synthetic_categorical_dataset(n_samples: int, cardinalities: list[int], rng: np.random.Generator,
                                  label_noise: float = 0.05) -> Dataset:
    """One-hot encoded categorical samples with labels from a planted linear rule.

    Mimics the layout of one-hot benchmark sets: every sample has exactly one
    active 0/1 feature per attribute.
    """
    offsets = np.concatenate([[0], np.cumsum(cardinalities)[:-1]])
    dim = int(np.sum(cardinalities))
    cats = np.stack([rng.integers(0, c, size=n_samples) for c in cardinalities], axis=1)
    cols = cats + offsets
    planted = rng.normal(0.0, 1.0, size=dim)
    score = planted[cols].sum(axis=1)
    y = np.where(score > np.median(score), 1.0, -1.0)
    flip = rng.random(n_samples) < label_noise
    y[flip] = -y[flip]
    idx = [np.sort(c) + 1 for c in cols]
    vals = [np.ones(len(cardinalities)) for _ in range(n_samples)]
    return Dataset(idx, vals, y, dim)
