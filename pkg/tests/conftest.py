from __future__ import annotations

import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Call ``criterion(label, passed, detail)``; the line is printed at once and
    repeated in the terminal summary, then the boolean is asserted. A
    ``known_failure`` reason turns a failure into an xfail; the FAIL line stays.
    """

    def record(label: str, passed: bool, detail: str = "", known_failure: str | None = None) -> None:
        line = f"{label}: {'PASS' if passed else 'FAIL'}" + (f"  ({detail})" if detail else "")
        _LINES.append(line)
        print(line)
        if not passed and known_failure:
            pytest.xfail(known_failure)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
