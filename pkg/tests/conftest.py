import numpy as np
import pytest

from groundcut import synth
from groundcut.sensor import SensorModel

SUITE_SEEDS = range(20)

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        _criteria[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title, detail = _criteria[number]
        line = f"criterion {number:>2} {status}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def hdl64e():
    return SensorModel.hdl64e()


@pytest.fixture(scope="session")
def obstacle_scan(hdl64e):
    return synth.generate(synth.obstacle_scene(), hdl64e)


@pytest.fixture(scope="session")
def curb_scan(hdl64e):
    return synth.generate(synth.curb_scene(), hdl64e)


@pytest.fixture(scope="session")
def flat_scan(hdl64e):
    return synth.generate(synth.flat_scene(0.0), hdl64e)


@pytest.fixture(scope="session")
def noisy_flat_scan(hdl64e):
    return synth.generate(synth.flat_scene(0.01, seed=1), hdl64e)


@pytest.fixture(scope="session")
def random_suite(hdl64e):
    return [synth.generate(synth.random_scene(s), hdl64e) for s in SUITE_SEEDS]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
