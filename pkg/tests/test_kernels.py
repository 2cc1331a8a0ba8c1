import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtgo import _pykernels, kernels
from dtgo.gossip import GossipProcess, inverse_indegree_matrix
from dtgo.graphs import gilbert_graph

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="compiled extension not built")


def _setup(n, seed, delayed):
    rng = np.random.default_rng(seed)
    g = gilbert_graph(n, 0.4, rng)
    delays = {e: int(rng.poisson(0.7)) for e in g.non_self_edges()} if delayed else {}
    w = GossipProcess.static(inverse_indegree_matrix(g), delays).matrix(0)
    return w, rng


@given(st.integers(1, 15), st.integers(0, 2**32 - 1), st.booleans(), st.integers(1, 8))
def test_python_csr_mix_matches_dense(n, seed, delayed, d):
    w, rng = _setup(n, seed, delayed)
    z = rng.normal(size=(w.size, d))
    p, i, v = w.csr
    assert np.allclose(_pykernels.csr_mix(p, i, v, z), w.weights @ z, rtol=1e-14, atol=1e-15)


@compiled
@given(st.integers(1, 15), st.integers(0, 2**32 - 1), st.booleans(), st.integers(1, 8))
def test_backends_bitwise_equal(n, seed, delayed, d):
    w, rng = _setup(n, seed, delayed)
    ck = kernels.get("compiled")
    p, i, v = w.csr
    z = rng.normal(size=(w.size, d))
    assert np.array_equal(ck.csr_mix(p, i, v, z), _pykernels.csr_mix(p, i, v, z))
    m = w.size
    indptr, keys, vals = np.arange(m + 1, dtype=np.int64), np.arange(m, dtype=np.int64), np.ones(m)
    rounds = int(rng.integers(1, 25))
    a = ck.dict_gossip(p, i, v, indptr, keys, vals, m, rounds, 1e-300)
    b = _pykernels.dict_gossip(p, i, v, indptr, keys, vals, m, rounds, 1e-300)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@compiled
def test_flush_keeps_keys():
    # one key decays below the flush threshold but stays present with mass zero
    p = np.array([0, 1], dtype=np.int64)
    i = np.array([0], dtype=np.int64)
    v = np.array([1e-200])
    for k in (kernels.get("compiled"), _pykernels):
        out_p, out_k, out_v = k.dict_gossip(p, i, v, np.array([0, 1]), np.array([0]), np.array([1.0]), 1, 2, 1e-300)
        assert out_k.tolist() == [0] and out_v.tolist() == [0.0]


def test_backend_env_override():
    env = dict(os.environ, DTGO_BACKEND="python")
    done = subprocess.run([sys.executable, "-c", "from dtgo import kernels; print(kernels.BACKEND)"],
                          capture_output=True, text=True, env=env)
    assert done.stdout.strip() == "python"
    env["DTGO_BACKEND"] = "fortran"
    done = subprocess.run([sys.executable, "-c", "import dtgo.kernels"], capture_output=True, text=True, env=env)
    assert done.returncode != 0 and "not available" in done.stderr


def test_get_default_and_named():
    assert kernels.get() is kernels.BACKENDS[kernels.BACKEND]
    assert kernels.get("python") is _pykernels


def test_benchmark_script_runs():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    done = subprocess.run([sys.executable, os.path.join(root, "benchmarks", "bench_kernels.py"), "--nodes", "20",
                           "--rounds", "4", "--mix-steps", "5", "--repeat", "1"], capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
    assert "dict_gossip" in done.stdout
