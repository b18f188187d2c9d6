from __future__ import annotations

import pytest

from mixtime.graphcore import generate, parse_family

# (family, lazy): the acceptance suite
SUITE = [
    ("complete:3", False),
    ("complete:4", False),
    ("complete:5", False),
    ("complete:6", False),
    ("complete:7", False),
    ("complete:8", False),
    ("cycle:5", False),
    ("cycle:7", False),
    ("petersen", False),
    ("lollipop:4,4", False),
    ("lollipop:6,6", False),
    ("barbell:5", False),
    ("cycle:6", True),
]

SUITE_IDS = [f"{f}{'-lazy' if lazy else ''}" for f, lazy in SUITE]


def make(family: str):
    return generate(parse_family(family))


@pytest.fixture
def triangle():
    return make("complete:3")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    def _record(criterion: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f": {detail}" if detail else ""))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
