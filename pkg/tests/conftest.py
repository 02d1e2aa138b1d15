"""Collects outcomes of tests marked ``criterion`` and prints one line per criterion."""

_CRITERIA: dict[str, dict] = {}


def pytest_itemcollected(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        label, title = marker.args
        item.user_properties.append(("criterion", label))
        _CRITERIA.setdefault(label, {"title": title, "ok": True, "ran": False})


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    entry = _CRITERIA[label]
    if report.when == "call" and report.passed:
        entry["ran"] = True
    if report.failed or report.skipped:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    ran = {k: v for k, v in _CRITERIA.items() if v["ran"] or not v["ok"]}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ran, key=lambda s: int(s[2:])):
        entry = ran[label]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"{label:<5} {status}  {entry['title']}")
