import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from elastopinn.network import FieldModel, HardBCTransform, NetworkConfig, init_network

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def single_net_model(d, m, hidden, seed=0, bc=None):
    net = init_network(NetworkConfig(d, m, hidden, seed=seed))
    return FieldModel((net,), bc or HardBCTransform.none(m))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
