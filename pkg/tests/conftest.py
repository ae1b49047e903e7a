import warnings

import pytest

warnings.filterwarnings("ignore", message="Using `httpx` with `starlette")


@pytest.fixture
def two_site_instance():
    """Two unit agents, demands uniform over {0.8, 1.2}, budget 2."""
    from seqfair.core import FILLING_RATIO, make_instance
    from seqfair.distributions import two_point_uniform

    d = two_point_uniform(0.8, 1.2)
    return make_instance([1.0, 1.0], [d, d], [2.0], FILLING_RATIO)
