import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


def _line(number, title, ok, detail):
    return f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title} ({detail})"


@pytest.fixture
def criterion(request):
    """Record the verdict for the test's criterion marker; fails the test on FAIL."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    lines = request.config.stash[_LINES]

    def record(ok, detail):
        line = _line(number, title, ok, detail)
        lines.append(line)
        request.node.stash[_LINES] = line
        print(line)
        assert ok, line

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call" and report.failed and _LINES not in item.stash:
        item.config.stash[_LINES].append(_line(*marker.args, False, f"error: {call.excinfo.typename}"))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_LINES]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
