import contextlib
import time

import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome for the end-of-run summary."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            _ACCEPTANCE[number] = f"FAIL  AC{number:<2d} {title}  ({type(exc).__name__}: {exc})"
            raise
        _ACCEPTANCE[number] = f"PASS  AC{number:<2d} {title}  [{time.perf_counter() - start:.1f}s]"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number].splitlines()[0])
