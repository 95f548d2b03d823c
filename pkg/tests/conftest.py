import numpy as np
import pytest

from so3embed.embedding import TABLE_GROUPS, registry_lookup


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(params=TABLE_GROUPS)
def registered_spec(request):
    """One locally isometric registered spec per run, all twelve groups."""
    return registry_lookup(request.param)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance checks")
