import sys
from pathlib import Path

import pytest

# Make the sibling helper modules (oracles, synth) importable regardless of
# how pytest was invoked.
sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, title): marks a test as checking one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    out = yield
    rep = out.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num, title = marker.args
    entry = _ACCEPTANCE.setdefault(int(num), {"title": title, "outcomes": []})
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry["outcomes"].append(rep.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[num]
        outcomes = entry["outcomes"] or ["skipped"]
        word = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{word}] {entry['title']}")
