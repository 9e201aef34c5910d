import numpy as np
import pytest
from hypothesis import settings

from fpslow.model import Discretization, SdeModel, linear_ou_model

settings.register_profile("ci", max_examples=25, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def ou():
    return linear_ou_model(epsilon=1e-2, R=2.0)


@pytest.fixture
def disc():
    return Discretization(X=8.0, nx=801, ny=39)


def cubic_model(y_shift=0.0):
    return SdeModel.from_strings("-x^3 - x + y", "-x", np.sqrt(2.0), np.sqrt(2.0), 1e-2, 2.0)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, passed, detail)."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, passed, detail):
        store[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(store):
        passed, detail = store[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
