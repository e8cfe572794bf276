import numpy as np
import pytest

from approxgpdm import casestudies, systems
from approxgpdm.gpdm import RegressorLayout

# criterion number -> list of (passed, detail)
_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record the outcome of one acceptance criterion check."""

    def record(number, passed, detail):
        _ACCEPTANCE.setdefault(number, []).append((bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[number]
        ok = all(p for p, _ in checks)
        detail = "; ".join(d for _, d in checks)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def pp_model():
    ds = systems.generate_pp_training(casestudies.stream(0, 0))
    model, _ = casestudies.fit_model(ds, RegressorLayout.ssm(2, 2), seed=0)
    return model


@pytest.fixture(scope="session")
def pp_inputs():
    return np.array([systems.pp_input(t) for t in range(300)])
