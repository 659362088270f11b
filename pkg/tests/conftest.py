import numpy as np
import pytest
from hypothesis import strategies as st

from shipdob.vessel import MILLIAMPERE, VesselParams


def vessel_params():
    """Random vessels around the milliAmpere values with sigma > 0."""
    base = MILLIAMPERE.to_dict()

    def build(scales):
        values = {k: v * s for (k, v), s in zip(base.items(), scales)}
        return VesselParams(**values)

    scale = st.floats(0.2, 5.0, allow_nan=False)
    return st.lists(scale, min_size=len(base), max_size=len(base)).map(build)


def velocities(bound=3.0):
    comp = st.floats(-bound, bound, allow_nan=False, allow_infinity=False)
    return st.tuples(comp, comp, comp).map(np.array)


@pytest.fixture(scope="session")
def milliampere():
    return MILLIAMPERE


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
