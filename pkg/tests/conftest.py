from pathlib import Path

import numpy as np
import pytest

import qcycle

FIXTURES = Path(qcycle.__file__).parent / "fixtures"

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / f"{name}.json"


@pytest.fixture
def record():
    """Record the outcome of one acceptance criterion for the terminal summary."""

    def _record(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'} - {detail}")
