import numpy as np
import pytest

from edasched.core import Instance, StaticJobs


def dyadic_uniform(rng, lo, hi, n, denom=16):
    """Uniform on a dyadic grid (multiples of 1/denom, denom a power of 2).

    Sums, differences, maxima of such values are exact in float64, so
    no-tolerance identities (Lipschitz inequalities, solver value equality)
    hold without rounding artifacts.
    """
    return rng.integers(int(lo * denom), int(hi * denom) + 1, n).astype(np.float64) / denom


def random_dyadic_instance(rng, n):
    statics = StaticJobs(
        releases=dyadic_uniform(rng, 0, 10, n),
        processings=rng.integers(1, 81, n).astype(np.float64) / 16,
    )
    return Instance(statics, dyadic_uniform(rng, 0, 10, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
