import sys

import hypothesis
import numpy as np
import pytest

from manisp import matfun

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_spd(rng, m, lo=0.1, hi=10.0):
    q = matfun.haar_orthogonal(m, rng)
    return matfun.from_eig(np.exp(rng.uniform(np.log(lo), np.log(hi), m)), q)


def random_sym(rng, m):
    a = rng.standard_normal((m, m))
    return 0.5 * (a + a.T)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
