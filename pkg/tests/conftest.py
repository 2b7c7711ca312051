import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from builders import carving_fixture, target_replica, protocol_variants, tail_fixture  # noqa: E402

# criterion number -> (description, outcome)
_ACCEPTANCE: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    entry = _ACCEPTANCE.setdefault(number, [text, "PASS"])
    if report.failed or (report.when == "call" and report.skipped):
        entry[1] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        text, result = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {result}  {text}")


@pytest.fixture(scope="session")
def replica():
    return target_replica()


@pytest.fixture(scope="session")
def tail_volume():
    return tail_fixture()


@pytest.fixture(scope="session")
def protocol_corpus():
    return protocol_variants(20)


@pytest.fixture(scope="session")
def carving():
    return carving_fixture(0)
