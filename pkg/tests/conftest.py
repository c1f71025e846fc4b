import pytest

ACCEPTANCE: list[str] = []


@pytest.fixture()
def report():
    def add(number: int, name: str, ok: bool, detail: str = ""):
        ACCEPTANCE.append(f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
