import pytest

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; call before asserting so failures are listed too."""

    def record(cid: str, passed: bool, detail: str) -> bool:
        _CRITERIA[cid] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
        passed, detail = _CRITERIA[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if passed else 'FAIL'}  {detail}")
