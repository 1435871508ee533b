from __future__ import annotations

from collections import defaultdict

import pytest

TITLES = {
    1: "transform kernel identities",
    2: "worked transform and undersampling examples",
    3: "instance weight arithmetic",
    4: "full-budget estimate equals exact metrics",
    5: "neyman variance <= equal-allocation variance",
    6: "logistic gradient check",
    7: "instance weighting beats pooled source training",
    8: "feature augmentation beats best baseline",
    9: "relatedness gate calibration",
    10: "source ranking correctness",
    11: "negative transfer is shown and flagged",
    12: "encoder straight-line oracles",
}

_outcomes: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and (rep.when == "call" or rep.outcome != "passed"):
        _outcomes[mark.args[0]].append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(TITLES):
        outs = _outcomes.get(n)
        if not outs:
            continue
        status = "PASS" if all(o == "passed" for o in outs) else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}  {status}  {TITLES[n]}")
