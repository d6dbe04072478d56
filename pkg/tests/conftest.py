import numpy as np
import pytest

from skewbm.num_core import RngStream
from skewbm.sbm_sim import GridPath, SbmParams


@pytest.fixture
def stream():
    return RngStream(12345, 0)


def make_path(values, T=None, theta=0.0):
    """GridPath through the given values; T defaults to n so that delta = 1."""
    values = np.asarray(values, dtype=float)
    n = values.size - 1
    T = float(n) if T is None else T
    return GridPath(SbmParams(theta=theta, x0=float(values[0]), T=T, n=n), values)
