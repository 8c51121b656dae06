import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cogsec.channel import AuxiliaryPolicy, ChannelSpec
from cogsec.probability import random_conditional, random_pmf

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_spec(rng, ns=2, nx1=2, nx2=2, ny1=2, ny2=2):
    ps = random_pmf(rng, (ns,))
    kernel = random_conditional(rng, (ns, nx1, nx2), (ny1, ny2))
    return ChannelSpec(ps, kernel)


def random_policy(rng, spec, nu=2, nv=2):
    px1 = random_pmf(rng, (spec.n_x1,))
    cond = random_conditional(rng, (spec.n_s, spec.n_x1), (nu, nv, spec.n_x2))
    return AuxiliaryPolicy(px1, cond)


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
