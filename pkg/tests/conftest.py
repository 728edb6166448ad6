import numpy as np
import pytest

from kinwave.core import DEFAULT_CAR, DEFAULT_PTW, ClassId, VehicleClassParams
from kinwave.speedlaw import FreeSpaceLaw, GreenshieldsLaw


@pytest.fixture
def law():
    return FreeSpaceLaw(DEFAULT_PTW, DEFAULT_CAR)


@pytest.fixture
def green():
    return GreenshieldsLaw(DEFAULT_PTW, DEFAULT_CAR)


@pytest.fixture
def rng():
    return np.random.default_rng(20260117)


def half_length_green():
    """Greenshields law with round numbers for hand calculations."""
    ptw = VehicleClassParams(ClassId.PTW, v_free=20.0, r_crit=1.0, eff_length=0.5)
    car = VehicleClassParams(ClassId.CAR, v_free=15.0, r_crit=1.5, eff_length=2.0)
    return GreenshieldsLaw(ptw, car)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} {detail}")
