# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: sparse dictionary gossip and CSR row mixing."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef idx_t _bound(const idx_t[:] w_indptr, const idx_t[:] w_indices,
                  const idx_t[:] indptr, idx_t n_keys):
    cdef idx_t n, a, total = 0, row
    for n in range(w_indptr.shape[0] - 1):
        row = 0
        for a in range(w_indptr[n], w_indptr[n + 1]):
            row += indptr[w_indices[a] + 1] - indptr[w_indices[a]]
        total += row if row < n_keys else n_keys
    return total


def dict_gossip(w_indptr, w_indices, w_data, indptr, keys, vals,
                Py_ssize_t n_keys, Py_ssize_t n_rounds=1, double flush=1e-300):
    """Run ``n_rounds`` synchronous rounds of weighted dictionary averaging.

    Row ``n`` of the CSR matrix ``w`` lists the in-neighbours of node ``n``
    (ascending) and their weights. Dictionaries are CSR rows over key
    indices ``0..n_keys-1``; keys keep first-seen order within each row.
    """
    cdef const idx_t[:] wp = np.ascontiguousarray(w_indptr, dtype=np.int64)
    cdef const idx_t[:] wi = np.ascontiguousarray(w_indices, dtype=np.int64)
    cdef const double[:] wd = np.ascontiguousarray(w_data, dtype=np.float64)
    cdef idx_t n_rows = wp.shape[0] - 1
    cdef cnp.ndarray[idx_t, ndim=1] cur_p = np.ascontiguousarray(indptr, dtype=np.int64).copy()
    cdef cnp.ndarray[idx_t, ndim=1] cur_k = np.ascontiguousarray(keys, dtype=np.int64).copy()
    cdef cnp.ndarray[double, ndim=1] cur_v = np.ascontiguousarray(vals, dtype=np.float64).copy()
    cdef cnp.ndarray[idx_t, ndim=1] marker = np.full(n_keys, -1, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] acc = np.zeros(n_keys, dtype=np.float64)
    cdef cnp.ndarray[idx_t, ndim=1] new_p, new_k
    cdef cnp.ndarray[double, ndim=1] new_v
    cdef idx_t r, n, a, m, j, key, pos, start, stamp = 0
    cdef double w, x
    for r in range(n_rounds):
        new_p = np.empty(n_rows + 1, dtype=np.int64)
        cap = _bound(wp, wi, cur_p, n_keys)
        new_k = np.empty(cap, dtype=np.int64)
        new_v = np.empty(cap, dtype=np.float64)
        pos = 0
        new_p[0] = 0
        for n in range(n_rows):
            start = pos
            for a in range(wp[n], wp[n + 1]):
                m = wi[a]
                w = wd[a]
                for j in range(cur_p[m], cur_p[m + 1]):
                    key = cur_k[j]
                    if marker[key] != stamp:
                        marker[key] = stamp
                        acc[key] = w * cur_v[j]
                        new_k[pos] = key
                        pos += 1
                    else:
                        acc[key] += w * cur_v[j]
            for j in range(start, pos):
                x = acc[new_k[j]]
                new_v[j] = x if x >= flush else 0.0
            new_p[n + 1] = pos
            stamp += 1
        cur_p = new_p
        cur_k = new_k[:pos].copy()
        cur_v = new_v[:pos].copy()
    return cur_p, cur_k, cur_v


def csr_mix(indptr, indices, data, z):
    """Return ``W @ z`` for a CSR matrix ``W`` and a dense ``(n, d)`` array."""
    cdef const idx_t[:] p = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const idx_t[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:] w = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n_rows = p.shape[0] - 1, d = zv.shape[1]
    out = np.zeros((n_rows, d), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t n, a, j, m
    cdef double c
    for n in range(n_rows):
        for a in range(p[n], p[n + 1]):
            m = ix[a]
            c = w[a]
            for j in range(d):
                o[n, j] += c * zv[m, j]
    return out
