import re

import numpy as np
import pytest

from trajset.tracking import Trajectory

_ACCEPTANCE = {}


def make_traj(start, displacements, start_frame=0, level=0):
    """Trajectory from a start point and an (L, 2) displacement array."""
    d = np.asarray(displacements, dtype=np.float64).reshape(-1, 2)
    pts = np.cumsum(np.vstack([np.asarray(start, dtype=np.float64)[None], d]), axis=0)
    return Trajectory(start_frame, level, pts, d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
        _ACCEPTANCE[key] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), (outcome, detail) in sorted(_ACCEPTANCE.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] criterion {num}: {name.replace('_', ' ')}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
