"""Shared test plumbing: the acceptance-criteria result recorder.

Acceptance tests register one verdict per criterion; the terminal summary
prints one PASS/FAIL line for each so the run's gate status is readable
without digging through tracebacks.
"""

from __future__ import annotations

from contextlib import contextmanager

RESULTS: list[tuple[int, str, bool]] = []


def record_criterion(number: int, name: str, passed: bool) -> None:
    RESULTS.append((number, name, passed))


@contextmanager
def criterion(number: int, name: str):
    """Mark the enclosing checks as one acceptance criterion."""
    try:
        yield
    except BaseException:
        record_criterion(number, name, False)
        raise
    record_criterion(number, name, True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed in sorted(RESULTS):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} ({name}): {verdict}")
