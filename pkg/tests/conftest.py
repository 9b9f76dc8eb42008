import numpy as np
import pytest

from fisheyeseg.camera import FisheyeCalibration
from fisheyeseg.simulator import default_intrinsics, default_mounting

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((marker.args[0], marker.args[1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_acceptance):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")


@pytest.fixture
def calib():
    """Default simulator calibration (forward camera pitched down, 1 m high)."""
    return default_mounting().calibration(default_intrinsics())


@pytest.fixture
def axial_calib():
    """Camera looking along +z with the road below (+y down), 1 m high."""
    return FisheyeCalibration(
        coeffs=(190.0, -8.0, 3.0, -1.0),
        principal_point=(319.5, 239.5),
        image_size=(640, 480),
        theta_max=np.deg2rad(95.0),
        R_C=np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]]),
        eta_C=1.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
