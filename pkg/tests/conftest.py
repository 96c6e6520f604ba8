import numpy as np
import pytest

# (criterion, passed, detail) rows filled by tests/test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20040815)


@pytest.fixture
def criterion():
    def record(name: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE.append((name, bool(passed), detail))
        print(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[1].rstrip("abc"))):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
