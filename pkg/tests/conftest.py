import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record the one-line outcome of an acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str):
        _VERDICTS[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        print(_VERDICTS[number])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[n])
