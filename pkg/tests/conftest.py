from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from dynkinlab import backend

settings.register_profile("dynkinlab", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dynkinlab")


@pytest.fixture
def python_backend():
    """Run one test against the numpy kernels, then restore the default."""
    prev = backend.name()
    backend.set_backend("python")
    yield
    backend.set_backend(prev)
