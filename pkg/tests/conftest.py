import json
from pathlib import Path

import pytest

ORACLES = Path(__file__).parent / "oracles" / "derived.json"


@pytest.fixture(scope="session")
def derived():
    """Frozen reference values written by ``oracles/build_oracles.py``."""
    with open(ORACLES) as fh:
        return json.load(fh)


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def criterion(request):
    """``criterion(k, ok, detail)`` records and prints one pass/fail line, then asserts."""

    def record(k, ok, detail):
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._criteria[k] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_criteria", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
