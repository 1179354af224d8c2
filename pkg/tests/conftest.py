from pathlib import Path

import pytest

from causaldebug.entropic_orientation import descent_monitor

FIXTURES = Path(__file__).parent / "fixtures"

# (criterion, passed, detail) rows filled in by the acceptance suite
ACCEPTANCE: list = []


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def criterion():
    def record(name, passed, detail):
        ACCEPTANCE.append((name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for name, passed, detail in ACCEPTANCE:
            terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    terminalreporter.write_line(
        f"latent search descent: {descent_monitor.iterations} iterations, {descent_monitor.violations} violations"
    )


def pytest_sessionfinish(session, exitstatus):
    # every latent-search iteration of the run must have lowered (or kept) the loss
    if descent_monitor.violations:
        session.exitstatus = 1


def pytest_collection_modifyitems(items):
    # the whole-run descent check must see every other test's latent searches first
    items.sort(key=lambda item: item.get_closest_marker("run_last") is not None)
