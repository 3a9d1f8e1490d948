from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import suites  # noqa: E402

@pytest.fixture
def unbalanced():
    return suites.named("unbalanced")


@pytest.fixture
def local_even():
    return suites.named("local_even")


@pytest.fixture
def local_skewed():
    return suites.named("local_skewed")


@pytest.fixture
def penalty_needed():
    return suites.named("penalty_needed")


def pytest_terminal_summary(terminalreporter):
    if suites.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in suites.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
