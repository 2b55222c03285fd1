import re

import pytest

_LINES: dict[int, str] = {}


def _line(k: int, ok: bool, detail: str) -> str:
    return f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture
def report():
    """Record the outcome line for an acceptance criterion before asserting it."""

    def record(k: int, ok: bool, detail: str) -> bool:
        _LINES[k] = _line(k, ok, detail)
        print(_LINES[k])
        return ok

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_c(\d+)_", item.name)
    # a criterion that raised before reaching its check still gets a line
    if m and rep.when == "call" and rep.failed and int(m.group(1)) not in _LINES:
        err = call.excinfo.value if call.excinfo else "error"
        _LINES[int(m.group(1))] = _line(int(m.group(1)), False, f"{type(err).__name__}: {err}")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
