import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    num, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    prev = _CRITERIA.get(num)
    ok = rep.passed and (prev is None or prev[1])
    _CRITERIA[num] = (title, ok, "; ".join(d for d in ((prev[2] if prev else ""), detail) if d))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[num]
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
