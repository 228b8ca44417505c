import numpy as np
import pytest

from bohmsteer.config import ExperimentConfig

WAVELENGTH = 808e-9
K = 2 * np.pi / WAVELENGTH
W0 = 3e-4
D = 3e-3

_acceptance_lines: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    verdict = "PASS" if report.passed else "FAIL"
    _acceptance_lines[number] = f"{verdict} AC{number:<2} {title}" + (f" | {detail}" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_acceptance_lines):
            terminalreporter.write_line(_acceptance_lines[n])


@pytest.fixture
def config():
    return ExperimentConfig()


@pytest.fixture
def split(config):
    return config.split_state()
