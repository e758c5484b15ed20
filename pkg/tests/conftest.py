import numpy as np
import pytest

from pactight.experiments import reference_scenario
from pactight.pacbayes import Scenario


def three_hypothesis_scenario():
    """Uniform D on 10 points; hypotheses wrong on the first 1, 4 and 5 points."""
    losses = np.zeros((3, 10))
    losses[0, :1] = 1
    losses[1, :4] = 1
    losses[2, :5] = 1
    return Scenario(10, [0.1] * 10, losses, [1 / 3] * 3, 100, 0.05)


@pytest.fixture
def three_h():
    # every point sampled ten times: empirical risks 0.1, 0.4, 0.5
    return three_hypothesis_scenario(), np.repeat(np.arange(10), 10)


@pytest.fixture
def ref():
    return reference_scenario()


_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    report = outcome.get_result()
    number, title = marker.args
    if report.when == "call" or report.failed:
        _, ok, seconds = _criteria.get(number, (title, True, 0.0))
        _criteria[number] = (title, ok and report.passed, seconds + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, seconds = _criteria[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title} ({seconds:.1f}s)")
