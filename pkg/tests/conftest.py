import numpy as np
import pytest

from smoothgof import setups
from smoothgof.models import TruncatedNormal, Uniform


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def std_truncnorm():
    return TruncatedNormal(0.0, 1.0, -10.0, 10.0, free=("mu", "sigma"))


@pytest.fixture
def unit_uniform():
    return Uniform(0.0, 1.0)


@pytest.fixture(scope="session")
def mixture_fits():
    """Reference and target fits to the canonical mixture dataset."""
    data = setups.mixture_dataset()
    ref, targets = setups.fit_mixture_setup(data)
    return data, ref, targets


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""

    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
