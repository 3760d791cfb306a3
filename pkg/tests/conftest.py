import pytest

_ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption(
        "--full",
        action="store_true",
        default=False,
        help="run the full-scale convergence studies (hours on one CPU)",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "full: full-scale run, skipped unless --full is given")


@pytest.fixture
def record_criterion():
    def record(number, name, passed, detail=""):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number} [{status}] {name}"
        if detail:
            line += f": {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


@pytest.fixture
def full_only(request, record_criterion):
    """Record a SKIP line for a full-scale criterion unless ``--full`` was given."""

    def check(number, name):
        if not request.config.getoption("--full"):
            record_criterion(number, name, None, "full-scale run; pass --full")
            pytest.skip("full-scale run; pass --full")

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
