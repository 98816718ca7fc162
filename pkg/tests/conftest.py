"""Collects the acceptance-criterion outcomes and prints one line per criterion."""

import pytest

CRITERIA = {
    1: "temporal order of all ten schemes in [1.7, 2.2]",
    2: "AC-EQ discrete energy identity per step",
    3: "energy monotone for all schemes at dt up to 0.1",
    4: "volume conservation (Lagrange, CH, penalty)",
    5: "plain AC loses its drops by t=4, AC-L1 conserves volume",
    6: "measured growth rates match the dispersion relation",
    7: "one step matches the dense corrected system",
    8: "Woodbury solve matches dense solves",
    9: "algebraic q reset beats Crank-Nicolson q at dt=1e-2",
    10: "AC-P-EQ at eta=1 fails to conserve volume",
}

_outcomes: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): test belongs to acceptance criterion n")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(marker, []).append((report.nodeid, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        report.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, text in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            status = "NOT RUN"
        elif all(o == "passed" for _, o in results):
            status = "PASS"
        elif any(o == "failed" for _, o in results):
            status = "FAIL"
        else:
            status = "SKIPPED"
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {text} ({len(results or [])} checks)")
