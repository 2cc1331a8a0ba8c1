"""Pure-Python versions of the compiled kernels (same signatures)."""

from __future__ import annotations

import numpy as np


def dict_gossip(w_indptr, w_indices, w_data, indptr, keys, vals, n_keys, n_rounds=1, flush=1e-300):
    w_indptr = np.asarray(w_indptr, dtype=np.int64)
    rows = [
        list(zip(np.asarray(keys[indptr[m]:indptr[m + 1]]).tolist(), np.asarray(vals[indptr[m]:indptr[m + 1]]).tolist()))
        for m in range(len(indptr) - 1)
    ]
    nbrs = [
        list(zip(w_indices[w_indptr[n]:w_indptr[n + 1]].tolist(), w_data[w_indptr[n]:w_indptr[n + 1]].tolist()))
        for n in range(len(w_indptr) - 1)
    ]
    for _ in range(n_rounds):
        new_rows = []
        for row in nbrs:
            acc: dict[int, float] = {}
            for m, w in row:
                for key, v in rows[m]:
                    if key in acc:
                        acc[key] += w * v
                    else:
                        acc[key] = w * v
            new_rows.append([(k, x if x >= flush else 0.0) for k, x in acc.items()])
        rows = new_rows
    out_p = np.zeros(len(rows) + 1, dtype=np.int64)
    out_p[1:] = np.cumsum([len(r) for r in rows])
    out_k = np.array([k for r in rows for k, _ in r], dtype=np.int64)
    out_v = np.array([v for r in rows for _, v in r], dtype=np.float64)
    return out_p, out_k, out_v


def csr_mix(indptr, indices, data, z):
    """``W @ z`` accumulated entry by entry in CSR order, like the compiled kernel.

    Vectorized across rows: pass ``t`` adds the ``t``-th stored entry of every
    row that has one, so each row sums in the same order as a scalar loop.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    data = np.asarray(data, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    lengths = np.diff(indptr)
    out = np.zeros((len(lengths), z.shape[1]))
    for t in range(int(lengths.max(initial=0))):
        rows = np.flatnonzero(lengths > t)
        pos = indptr[rows] + t
        out[rows] += data[pos, None] * z[indices[pos]]
    return out
