import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dtgo.graphs import DirectedGraph, example_digraph, gilbert_graph

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Hand-built oracles (rows = receivers, 0-based), written out independently of the library.
# Example digraph, 1-based edges 3->4, 4->2, 2->3, 2->1, 1->3, 5->3, 3->5 plus self-loops.
EXAMPLE_W = np.array([
    [1 / 2, 1 / 2, 0, 0, 0],
    [0, 1 / 2, 0, 1 / 2, 0],
    [1 / 4, 1 / 4, 1 / 4, 0, 1 / 4],
    [0, 0, 1 / 2, 1 / 2, 0],
    [0, 0, 1 / 2, 0, 1 / 2],
])
EXAMPLE_PI = np.array([1, 2, 2, 2, 1]) / 8

# Delay 2 on the 1-based edge 4->2: relays 6, 7 with 4 -> 6 -> 7 -> 2.
DELAYED_W = np.zeros((7, 7))
DELAYED_W[:5, :5] = EXAMPLE_W
DELAYED_W[1, 3] = 0.0
DELAYED_W[1, 6] = 1 / 2
DELAYED_W[5, 3] = 1.0
DELAYED_W[6, 5] = 1.0
DELAYED_PI = np.array([0.1, 0.2, 0.2, 0.2, 0.1, 0.1, 0.1])


def power_oracle(w: np.ndarray, k: int = 2**12) -> np.ndarray:
    """Any row of ``W^k`` by plain repeated multiplication in long double."""
    p = np.array(w, dtype=np.longdouble)
    acc = np.eye(w.shape[0], dtype=np.longdouble)
    while k:
        if k & 1:
            acc = acc @ p
        p = p @ p
        k >>= 1
    return np.asarray(acc[0], dtype=np.float64)


def random_corpus(count: int, seed: int, max_n: int = 30):
    """Strongly connected Gilbert graphs with mixed sizes and densities."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(2, max_n + 1))
        p = float(rng.uniform(max(0.08, 2.0 * np.log(n) / n), 0.9))
        out.append(gilbert_graph(n, min(p, 1.0), rng))
    return out


@pytest.fixture
def example_graph() -> DirectedGraph:
    return example_digraph()


# Acceptance verdicts, one line per criterion, printed at the end of the session.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
