import numpy as np
import pytest
from hypothesis import strategies as st

from mmnet import io


@pytest.fixture(scope="session")
def fixtures():
    return {name: io.load_fixture(name) for name in io.FIXTURES}


@st.composite
def pmfs(draw, size, zeros=True):
    """A probability vector of the given size, optionally with zero entries."""
    raw = draw(st.lists(st.floats(0.0 if zeros else 1e-3, 1.0), min_size=size, max_size=size))
    v = np.asarray(raw, dtype=float)
    if v.sum() <= 1e-9:
        v = np.ones(size)
    return v / v.sum()
