from collections import defaultdict

import pytest

_CRITERIA = defaultdict(list)


class AcceptanceLog:
    def record(self, criterion: int, title: str, ok: bool, detail: str = "") -> None:
        _CRITERIA[(criterion, title)].append((ok, detail))


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), results in sorted(_CRITERIA.items()):
        ok = all(r[0] for r in results)
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}")
        for passed, detail in results:
            if detail and not passed:
                terminalreporter.write_line(f"    - {detail}")
