import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


_criteria: dict[str, str] = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None or not mark.args:
        return
    label = mark.args[0]
    if call.when == "call" or call.excinfo is not None:
        failed = call.excinfo is not None
        if failed or label not in _criteria:
            _criteria[label] = "FAIL" if failed else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria):
        terminalreporter.write_line(f"{_criteria[label]}  {label}")
