import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings
from hypothesis import strategies as st

from fuelopt.lti import LtiSystem, controllability_matrix

settings.register_profile(
    "fuelopt", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("fuelopt")

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


@st.composite
def systems(draw, n=2, m=1, margin=0.05):
    """Controllable (A, B) with the smallest controllability singular value above ``margin``."""
    A = np.array(draw(st.lists(finite, min_size=n * n, max_size=n * n))).reshape(n, n)
    B = np.array(draw(st.lists(finite, min_size=n * m, max_size=n * m))).reshape(n, m)
    sv = np.linalg.svd(controllability_matrix(A, B), compute_uv=False)
    assume(sv[-1] > margin)
    return LtiSystem(A, B)


@pytest.fixture
def double_integrator():
    return LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
