"""Shared fixtures and the acceptance summary printed at the end of a run."""
import numpy as np
import pytest

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = mark.args
        detail = dict(item.user_properties).get("detail", "")
        _ACCEPTANCE[number] = (title, rep.outcome, rep.duration, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcome, duration, detail = _ACCEPTANCE[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] {number:2d}. {title} ({duration:.1f} s)"
        if detail:
            line += f" :: {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def detail(record_property):
    """Attach a one-line measurement summary to the acceptance report."""
    def _set(text):
        record_property("detail", text)
        print(text)
    return _set
