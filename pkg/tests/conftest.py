import pytest

# acceptance verdict lines, filled in by tests/test_acceptance.py
VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        VERDICTS[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
