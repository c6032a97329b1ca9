from __future__ import annotations

import sys

import pytest
from hypothesis import settings

# Fixed example sequence so every run checks the same cases.
settings.register_profile("repo", derandomize=True, deadline=None)
settings.load_profile("repo")


@pytest.fixture(autouse=True)
def _default_threads(monkeypatch):
    # Tests run with the auto thread count unless they set LF_THREADS themselves.
    monkeypatch.delenv("LF_THREADS", raising=False)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "CRITERIA_LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
