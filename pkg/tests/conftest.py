import sys
from collections import OrderedDict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    n = mark.args[0]
    ok = call.excinfo is None
    details = [v for k, v in item.user_properties if k == "detail"]
    entry = _CRITERIA.setdefault(n, {"ok": True, "details": []})
    entry["ok"] &= ok
    entry["details"].append(("" if ok else "FAIL ") + (details[-1] if details else item.name))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        line = f"criterion {n:2d}: {'PASS' if e['ok'] else 'FAIL'}  " + "; ".join(e["details"])
        terminalreporter.write_line(line)
