import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from jlmedoids import _backend

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=sorted(_backend.BACKENDS))
def backend(request):
    """Run the test once per available kernel backend."""
    prev = _backend.NAME
    _backend.use(request.param)
    yield request.param
    _backend.use(prev)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
