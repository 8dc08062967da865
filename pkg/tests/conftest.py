import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from scelab.discretization import make_grid
from scelab.plans import MarginalDensity, TransportPlan, symmetrize

settings.register_profile("scelab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("scelab")


@st.composite
def marginals(draw, n=None, floor=1e-3):
    """Strictly positive node masses on [0, 1]."""
    n = draw(st.integers(2, 8)) if n is None else n
    raw = draw(st.lists(st.floats(floor, 1.0), min_size=n, max_size=n))
    m = np.array(raw) / sum(raw)
    return MarginalDensity.from_mass(make_grid(0.0, 1.0, n), m)


@st.composite
def symmetric_plans(draw, n=None, N=None):
    n = draw(st.sampled_from([2, 3, 4])) if n is None else n
    N = draw(st.sampled_from([2, 3])) if N is None else N
    seed = draw(st.integers(0, 2**32 - 1))
    zeros = draw(st.booleans())
    rng = np.random.default_rng(seed)
    m = rng.random((n,) * N)
    if zeros:
        m *= rng.random(m.shape) > 0.3
        m.flat[0] += 1e-3
    return symmetrize(TransportPlan.from_mass(make_grid(0.0, 1.0, n), m / m.sum()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
