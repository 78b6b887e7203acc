import contextlib

import pytest

from helpers import make_conversation

VERDICTS = []


@pytest.fixture
def three_post():
    """p1 by A; p2 by B replying to p1; p3 by A replying to p2."""
    return make_conversation([("A", None), ("B", 0), ("A", 1)])


@pytest.fixture
def criterion():
    """``with criterion(n, title) as note:`` records one PASS/FAIL line."""
    @contextlib.contextmanager
    def record(number, title):
        details = []
        try:
            yield details.append
        except BaseException:
            VERDICTS.append((number, "FAIL", title, details))
            print(f"criterion {number}: FAIL {title} {'; '.join(details)}")
            raise
        VERDICTS.append((number, "PASS", title, details))
        print(f"criterion {number}: PASS {title} {'; '.join(details)}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, title, details in sorted(VERDICTS):
        line = f"criterion {number:>2}: {verdict}  {title}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
