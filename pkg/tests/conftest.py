import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record one ``PASS``/``FAIL`` line for the acceptance summary."""

    def record(criterion: str, ok: bool, detail: str, flag: str | None = None) -> bool:
        status = flag or ("PASS" if ok else "FAIL")
        line = f"{status} {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
            terminalreporter.write_line(line)
