import numpy as np
import pytest

from gapscope.facial import facial_reduction, reduce_to_rd
from gapscope.gallery import get_entry


@pytest.fixture(scope="session")
def ramana():
    return get_entry("ramana")


@pytest.fixture(scope="session")
def sd2():
    return get_entry("sd2")


@pytest.fixture(scope="session")
def control():
    return get_entry("control")


@pytest.fixture(scope="session")
def ramana_dual_chain(ramana):
    return facial_reduction(ramana.instance, "dual")


@pytest.fixture(scope="session")
def ramana_red(ramana, ramana_dual_chain):
    return reduce_to_rd(ramana.instance, ramana_dual_chain)


@pytest.fixture(scope="session")
def sd2_dual_chain(sd2):
    return facial_reduction(sd2.instance, "dual")


@pytest.fixture(scope="session")
def sd2_red(sd2, sd2_dual_chain):
    return reduce_to_rd(sd2.instance, sd2_dual_chain)


def rand_sym(rng, n, scale=1.0):
    g = rng.standard_normal((n, n))
    return scale * 0.5 * (g + g.T)


def rand_pd(rng, n):
    g = rng.standard_normal((n, n))
    return g @ g.T + 0.5 * np.eye(n)
