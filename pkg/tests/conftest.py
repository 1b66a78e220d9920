import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from mmdg.mesh import PhysicalMesh

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def random_meshes(draw, min_elements=2, max_elements=12):
    """Nonuniform meshes with element sizes within a factor 10 of each other."""
    n = draw(st.integers(min_elements, max_elements))
    x_left = draw(st.floats(-5.0, 5.0))
    length = draw(st.floats(0.1, 10.0))
    weights = draw(st.lists(st.floats(0.1, 1.0), min_size=n, max_size=n))
    h = np.array(weights) / np.sum(weights) * length
    nodes = x_left + np.concatenate(([0.0], np.cumsum(h)))
    nodes[-1] = x_left + length
    return PhysicalMesh(nodes)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
