import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion; its line is printed in the terminal summary."""
    state = {}

    def record(label, detail=""):
        state["label"], state["detail"] = label, detail

    yield record
    if "label" in state:
        rep = getattr(request.node, "rep_call", None)
        passed = rep is not None and rep.passed
        _CRITERIA[request.node.name] = (state["label"], passed, state["detail"])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_CRITERIA.values()):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
