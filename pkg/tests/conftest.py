import pytest

from chipletcost import CostParams, GridSpec, build_topology


@pytest.fixture
def params():
    return CostParams()


@pytest.fixture
def topo4():
    return build_topology(GridSpec(4, 4, "A"))


_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.get_closest_marker("acceptance") and (rep.when == "call" or rep.failed):
        title = (item.function.__doc__ or "").strip().splitlines()[0]
        _ACCEPTANCE.append((item.name, "PASS" if rep.passed else "FAIL", title))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, title in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {name}: {title}")
