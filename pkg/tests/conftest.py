import contextlib

import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s[0]):
            terminalreporter.write_line(line[1])


@pytest.fixture
def criterion(request):
    """Context manager that logs one PASS/FAIL line for an acceptance criterion."""
    log = request.config.stash[_KEY]

    @contextlib.contextmanager
    def record(number: str, label: str):
        detail = {}
        try:
            yield detail
        except BaseException:
            log.append((number, f"criterion {number} {label}: FAIL  {detail.get('msg', '')}".rstrip()))
            raise
        log.append((number, f"criterion {number} {label}: PASS  {detail.get('msg', '')}".rstrip()))
    return record
