import pytest

# (criterion number, title, passed, detail) in the order the checks ran
ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance verdict; the assertion is left to the caller."""

    def add(number: int, title: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE.append((number, title, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} [{number}] {title}: {detail}")
        return passed

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} [{number}] {title}: {detail}")
