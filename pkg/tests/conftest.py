import numpy as np
import pytest
from hypothesis import settings, HealthCheck, strategies as st

from onlinecolor.graph import make_instance

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_bipartite(rng: np.random.Generator, n: int, density: float = 0.5, uniform: bool = False):
    """Random bipartite instance on vertices 0..n-1 (arrival order) with a valid x."""
    sides = [int(s) for s in rng.integers(1, 3, size=n)]
    pairs = [(u, v) for v in range(n) for u in range(v) if sides[u] != sides[v] and rng.random() < density]
    deg = np.zeros(n, dtype=int)
    for u, v in pairs:
        deg[u] += 1
        deg[v] += 1
    delta = int(deg.max()) if pairs else 0
    adj = {}
    for u, v in pairs:
        if uniform:
            x = 1.0 / delta
        else:
            x = float(rng.uniform(0.05, 1.0)) / max(deg[u], deg[v])
        adj.setdefault(v, []).append((u, x))
    return make_instance(n, delta, adj, sides)


@st.composite
def bipartite_instances(draw, max_n: int = 10, uniform: bool = False):
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    density = draw(st.sampled_from([0.3, 0.6, 1.0]))
    return random_bipartite(np.random.default_rng(seed), n, density, uniform)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")
