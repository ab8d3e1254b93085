import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion, then return the verdict."""

    def _report(number: int, ok: bool, detail: str, extra: list[str] | None = None) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _LINES.append(line)
        _LINES.extend(f"    {e}" for e in extra or [])
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance")
        for line in _LINES:
            terminalreporter.write_line(line)
