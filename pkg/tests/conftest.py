import pytest

_ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Collect one summary line per acceptance criterion."""

    def record(number, name, passed, detail=""):
        _ACCEPTANCE.append((number, name, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        flag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{flag}] {number}. {name}: {detail}")
