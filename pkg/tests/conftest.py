import io

import pytest

from kgexplain.graph import load_graph


def nt(*lines: str) -> bytes:
    return ("\n".join(lines) + "\n").encode("utf-8")


def graph_of(*lines: str, config=None):
    return load_graph(io.BytesIO(nt(*lines)), config)


@pytest.fixture
def make_graph():
    return graph_of


# -- acceptance summary --------------------------------------------------------

_ACCEPTANCE: dict[int, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        n, title = mark.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        if hasattr(rep, "wasxfail"):
            status = "FAIL (expected, recorded)"
            detail = detail or rep.wasxfail
        else:
            status = {"passed": "PASS", "failed": "FAIL"}.get(rep.outcome, rep.outcome.upper())
        _ACCEPTANCE.setdefault(n, []).append((title, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        for title, status, detail in _ACCEPTANCE[n]:
            terminalreporter.write_line(f"criterion {n:2d} {title}: {status}" + (f" | {detail}" if detail else ""))
