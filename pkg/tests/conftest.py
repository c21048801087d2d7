import pytest

# acceptance test name -> (criterion number, short description)
CRITERIA = {
    "test_exact_knowledge_fractions": (1, "hand-built 3-node DAGs give k = 1/9 and 5/9 exactly"),
    "test_index_matches_brute_force": (2, "index queries match brute-force oracles on 200 random DAGs"),
    "test_metric_consistency": (3, "metric consistency suite over 100 random DAGs"),
    "test_root_knowledge_beats_quorum_indexer": (4, "RK/RK beats QI/QI on frames/s and frames/event, paired"),
    "test_reports_are_deterministic": (5, "byte-identical reports and golden files"),
    "test_no_emission_without_progress": (6, "every emitted event strictly raises its metric"),
}

_results: dict[int, str] = {}
_seconds: dict[int, float] = {}


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", help="rewrite tests/golden files")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or name not in CRITERIA:
        return
    number, _ = CRITERIA[name]
    _seconds[number] = _seconds.get(number, 0.0) + report.duration
    if report.failed:
        _results[number] = "FAIL"
    elif report.skipped:
        _results.setdefault(number, "SKIP")
    elif report.when == "call":
        _results.setdefault(number, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for name, (number, text) in sorted(CRITERIA.items(), key=lambda kv: kv[1][0]):
        if number in _results:
            terminalreporter.write_line(
                f"criterion {number}: {_results[number]}  {text}  ({_seconds[number]:.1f}s)")
