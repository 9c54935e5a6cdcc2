import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """``report(k, ok, detail)`` records the verdict of acceptance criterion ``k``."""

    def _report(k: int, ok: bool, detail: str) -> bool:
        _CRITERIA[k] = (bool(ok), detail)
        print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
