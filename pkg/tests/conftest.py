import pytest

_ACCEPTANCE: dict[str, dict] = {}


@pytest.fixture
def record(request):
    """Attach a one-line measurement to the acceptance summary of this test."""

    def _record(text: str) -> None:
        request.node.user_properties.append(("detail", text))

    return _record


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    entry = _ACCEPTANCE.setdefault(name, {"outcome": "passed", "detail": ""})
    if report.failed:
        entry["outcome"] = "failed"
    elif report.skipped and entry["outcome"] == "passed":
        entry["outcome"] = "skipped"
    for key, value in report.user_properties:
        if key == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[name]
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[entry["outcome"]]
        line = f"{label}  {name}"
        if entry["detail"]:
            line += f"  [{entry['detail']}]"
        tr.write_line(line)
    passed = sum(e["outcome"] == "passed" for e in _ACCEPTANCE.values())
    tr.write_line(f"{passed}/{len(_ACCEPTANCE)} criteria met")
