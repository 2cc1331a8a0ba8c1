import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DELAYED_PI, DELAYED_W, EXAMPLE_PI, EXAMPLE_W, power_oracle
from dtgo.gossip import (GossipMatrix, GossipProcess, SpectralError, extend_with_delays, geometric_rate_check,
                         inverse_indegree_matrix, perron_limit, read_matrix_csv, rounds_for_accuracy,
                         validate_gossip_matrix)
from dtgo.graphs import (DirectedGraph, GraphError, GraphSchedule, bidirectional_ring, complete_graph,
                         gilbert_graph, is_strongly_connected, ring_digraph, sample_round_graph)


def test_inverse_indegree_matches_hand_matrix(example_graph):
    w = inverse_indegree_matrix(example_graph)
    assert np.array_equal(w.weights, EXAMPLE_W)


def test_inverse_indegree_trivial_cases():
    assert np.array_equal(inverse_indegree_matrix(DirectedGraph.from_edges(1, [])).weights, [[1.0]])
    assert np.allclose(inverse_indegree_matrix(complete_graph(3)).weights, 1 / 3, atol=0)


def test_validation_passes_and_flags_each_clause(example_graph):
    assert validate_gossip_matrix(EXAMPLE_W, example_graph).ok
    w = EXAMPLE_W.copy()
    w[0, 0] = 0.0
    rep = validate_gossip_matrix(w, example_graph)
    assert rep.diagonal_failures == [0] and 0 in rep.row_sum_failures
    w = EXAMPLE_W.copy()
    w[2] *= 2
    rep = validate_gossip_matrix(w, example_graph)
    assert rep.row_sum_failures == [2] and not rep.diagonal_failures
    w = EXAMPLE_W.copy()
    w[0, 4] = 0.1
    assert (0, 4) in validate_gossip_matrix(w, example_graph).support_failures
    assert "(iii)" in str(validate_gossip_matrix(np.zeros((5, 5)), example_graph))


def test_delay_extension_matches_hand_matrix(example_graph):
    w = inverse_indegree_matrix(example_graph)
    net = extend_with_delays(w, {(3, 1): 2})
    assert np.array_equal(net.extended.weights, DELAYED_W)
    # highlighted entries, 1-indexed W[2][7], W[6][4], W[7][6]
    assert net.extended.weights[1, 6] == 0.5
    assert net.extended.weights[5, 3] == 1.0
    assert net.extended.weights[6, 5] == 1.0
    assert net.is_virtual.tolist() == [False] * 5 + [True] * 2
    assert net.chains == {(3, 1): [5, 6]}
    assert validate_gossip_matrix(net.extended, net.extended.graph, net.is_virtual).ok
    assert is_strongly_connected(net.extended.graph)


def test_delay_one_on_edge_five_to_three(example_graph):
    w = inverse_indegree_matrix(example_graph)
    net = extend_with_delays(w, {(4, 2): 1})
    want = np.zeros((6, 6))
    want[:5, :5] = EXAMPLE_W
    want[2, 4] = 0.0
    want[2, 5] = 0.25
    want[5, 4] = 1.0
    assert np.array_equal(net.extended.weights, want)
    assert np.allclose(net.extended.weights.sum(axis=1), 1.0, atol=1e-15)
    assert is_strongly_connected(net.extended.graph)


def test_empty_and_zero_delays_leave_matrix(example_graph):
    w = inverse_indegree_matrix(example_graph)
    for delays in ({}, {(3, 1): 0}):
        net = extend_with_delays(w, delays)
        assert net.extended is w and net.n_total == 5 and not net.is_virtual.any()


def test_delay_errors(example_graph):
    w = inverse_indegree_matrix(example_graph)
    with pytest.raises(GraphError, match="not in the graph"):
        extend_with_delays(w, {(0, 4): 1})
    with pytest.raises(GraphError, match="self-loop"):
        extend_with_delays(w, {(2, 2): 1})
    with pytest.raises(GraphError, match="negative"):
        extend_with_delays(w, {(3, 1): -1})


def test_perron_limit_example_and_delayed():
    s = perron_limit(EXAMPLE_W)
    assert np.allclose(s.pi, EXAMPLE_PI, atol=1e-13)
    assert np.allclose(s.pi, power_oracle(EXAMPLE_W), atol=1e-13)
    assert np.all(s.limit == s.limit[0])
    d = perron_limit(DELAYED_W)
    assert np.allclose(d.pi, DELAYED_PI, atol=1e-13)
    assert np.allclose(d.pi, power_oracle(DELAYED_W), atol=1e-13)
    assert np.all(d.pi[:5] > 1e-14)


def test_doubly_stochastic_ring_is_uniform():
    w = inverse_indegree_matrix(bidirectional_ring(4))
    s = perron_limit(w)
    assert np.allclose(s.pi, 0.25, atol=1e-14)


def test_rho_and_mixing_time_example():
    s = perron_limit(EXAMPLE_W)
    mods = np.sort(np.abs(np.linalg.eigvals(EXAMPLE_W)))
    assert s.rho == pytest.approx(mods[-2] ** 2, abs=1e-12)
    assert 0.0 <= s.rho < 1.0
    pk = np.linalg.matrix_power(EXAMPLE_W, s.mixing_tau)
    assert np.linalg.norm(pk - s.limit, 2) ** 2 < 1.0
    if s.mixing_tau > 1:
        prev = np.linalg.matrix_power(EXAMPLE_W, s.mixing_tau - 1)
        assert np.linalg.norm(prev - s.limit, 2) ** 2 >= 1.0


def test_non_primitive_matrix_raises():
    with pytest.raises(SpectralError):
        perron_limit(np.eye(2))
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(SpectralError):
        perron_limit(swap)


def test_rate_check_averaging_matrix_is_zero():
    j = np.full((4, 4), 0.25)
    s = perron_limit(j)
    r = geometric_rate_check(j, s, 10)
    assert np.all(r.norms < 1e-28)
    assert r.holds(s.rho)


def test_rate_check_example_slope():
    s = perron_limit(EXAMPLE_W)
    r = geometric_rate_check(EXAMPLE_W, s, 50)
    assert np.all(np.diff(r.norms[r.norms > r.floor]) <= 1e-15)
    assert r.slope == pytest.approx(np.log(s.rho), rel=0.05)
    assert r.holds(s.rho)


def test_rounds_for_accuracy():
    s = perron_limit(EXAMPLE_W)
    r = geometric_rate_check(EXAMPLE_W, s)
    k = rounds_for_accuracy(s, r, 1e-10)
    assert r.constant * s.rho**k < 1e-10 <= r.constant * s.rho ** (k - 1)


def test_matrix_csv_round_trip():
    g = gilbert_graph(7, 0.4, np.random.default_rng(1))
    w = inverse_indegree_matrix(g)
    assert np.array_equal(read_matrix_csv(w.to_csv()), w.weights)


def _random_delays(g, rng, lam=0.3):
    return {e: int(rng.poisson(lam)) for e in g.non_self_edges()}


@given(st.integers(2, 14), st.floats(0.15, 1.0), st.integers(0, 2**32 - 1), st.booleans())
def test_spectral_properties_random(n, p, seed, delayed):
    rng = np.random.default_rng(seed)
    g = gilbert_graph(n, p, rng)
    w = inverse_indegree_matrix(g)
    assert validate_gossip_matrix(w, g).ok
    net = extend_with_delays(w, _random_delays(g, rng) if delayed else {})
    ext = net.extended
    assert validate_gossip_matrix(ext, ext.graph, net.is_virtual).ok
    assert is_strongly_connected(ext.graph)
    s = perron_limit(ext)
    assert abs(s.pi.sum() - 1.0) < 1e-10
    assert np.all(s.pi[: net.n_real] > 1e-14)
    assert s.rho < 1.0
    assert np.allclose(ext.weights @ s.limit, s.limit, atol=1e-10)
    assert np.allclose(s.limit @ ext.weights, s.limit, atol=1e-10)
    assert np.allclose(s.pi @ ext.weights, s.pi, atol=1e-12)


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_relay_removal_recovers_original_connectivity(n, seed):
    rng = np.random.default_rng(seed)
    g = gilbert_graph(n, 0.4, rng)
    net = extend_with_delays(inverse_indegree_matrix(g), _random_delays(g, rng, 1.0))
    ext = net.extended.graph
    # contract every chain back to a direct edge
    recovered = set()
    for dst in range(n):
        for src in ext.in_neighbors[dst]:
            while src >= n:
                (preds,) = [ext.in_neighbors[src]]
                src = preds[0]
            recovered.add((src, dst))
    assert recovered == set(g.edges)


def test_expected_matrix_edge_drop_matches_monte_carlo():
    base = gilbert_graph(6, 0.5, np.random.default_rng(3))
    proc = GossipProcess(GraphSchedule(base, "edge-drop", 0.4, seed=11))
    exact = proc.expected_matrix()
    mc = np.mean([proc.matrix(k).weights for k in range(20000)], axis=0)
    assert np.allclose(exact.sum(axis=1), 1.0, atol=1e-12)
    assert np.max(np.abs(exact - mc)) < 0.01


def test_process_static_and_extended_rounds(example_graph):
    w = inverse_indegree_matrix(example_graph)
    proc = GossipProcess.static(w, {(3, 1): 2})
    assert proc.n_real == 5 and proc.n_total == 7
    assert proc.matrix(0) is proc.matrix(10)
    assert np.allclose(proc.spectral.pi, DELAYED_PI, atol=1e-13)


def test_edge_drop_round_loses_only_last_hop(example_graph):
    s = GraphSchedule(example_graph, "edge-drop", 0.5, seed=4)
    proc = GossipProcess(s, {(3, 1): 2})
    for k in range(30):
        g = sample_round_graph(s, k)
        m = proc.matrix(k).weights
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-15)
        assert m[5, 3] == 1.0 and m[6, 5] == 1.0  # relays always forward
        assert (m[1, 6] > 0) == g.has_edge(3, 1)


def test_local_steps_expected_matrix_is_period_product():
    base = ring_digraph(4)
    proc = GossipProcess(GraphSchedule(base, "local-steps", period=3))
    w = inverse_indegree_matrix(base).weights
    assert np.allclose(proc.expected_matrix(), w)  # identity rounds leave the product unchanged
    assert np.allclose(proc.spectral.pi, 0.25)


def test_check_connected_raises():
    g = DirectedGraph.from_edges(3, [(0, 1), (1, 2)])
    proc = GossipProcess(GraphSchedule(g, "edge-drop", 0.1))
    with pytest.raises(GraphError):
        proc.check_connected()


def test_gossip_matrix_csr(example_graph):
    w = inverse_indegree_matrix(example_graph)
    p, i, d = w.csr
    dense = np.zeros((5, 5))
    for n in range(5):
        dense[n, i[p[n]:p[n + 1]]] = d[p[n]:p[n + 1]]
    assert np.array_equal(dense, w.weights)


def test_gossip_matrix_size():
    assert GossipMatrix(np.eye(1), DirectedGraph.from_edges(1, [])).size == 1
