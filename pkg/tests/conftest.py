import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from intfunc.cli import PROBLEMS_DIR

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def bundled():
    """Load a bundled problem file by stem."""

    def load(stem: str) -> dict:
        return json.loads((PROBLEMS_DIR / f"{stem}.json").read_text())

    return load


def bundled_paths(prefix: str = "") -> list[Path]:
    return sorted(PROBLEMS_DIR.glob(f"{prefix}*.json"))


def pytest_configure(config):
    config._acceptance_lines = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion; lines are printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        request.config._acceptance_lines[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
