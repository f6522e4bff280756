from pathlib import Path

import pytest

from phytonlp.synthetic import synthetic_corpus

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: dict[str, list[str]] = {}


def pytest_runtest_logreport(report):
    name = getattr(report, "criterion_name", None)
    if name is None:
        return
    outcomes = _criteria.setdefault(name, [])
    if report.when == "call" or report.outcome != "passed":
        outcomes.append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion_name = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda s: (int(s.split()[0]) if s.split()[0].isdigit() else 99, s)):
        outcomes = _criteria[name]
        if "failed" in outcomes:
            status = "FAIL"
        elif outcomes and all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"{status}  criterion {name}")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def synth500():
    """The 500-document synthetic corpus used by the end-to-end checks."""
    return synthetic_corpus(500, seed=0)
