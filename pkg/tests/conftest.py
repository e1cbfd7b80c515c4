import json

import pytest

from qrisk.corpus import Query, Scenario


def write_lines(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")
    return path


@pytest.fixture
def query():
    return Query("q1", "Who wrote The Road?", Scenario.ABSTRACTIVE, "trivia",
                 gold=("Cormac McCarthy",))


_CRITERIA = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if report.when == "call" and "criterion" in props:
        _CRITERIA.append((report.outcome, props["criterion"], props.get("elapsed", "n/a")))


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for outcome, name, elapsed in _CRITERIA:
            mark = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"{mark}  {name}  ({elapsed})")
