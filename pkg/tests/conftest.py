import time

import pytest

from safe_el import scenario as scn, sim

# name -> (preset, overrides)
ACCEPTANCE_RUNS = {
    "joint_k1_0.5": ("joint_sva", ["blf.k1=0.5"]),
    "joint_paper": ("joint_sva", []),
    "joint_baseline": ("joint_sva", ["sim.unfiltered_baseline=true"]),
    "task_case1": ("task_case1", []),
    "task_case2": ("task_case2", []),
    "task_case3": ("task_case3", []),
}

# criterion id -> (passed, detail); filled by test_acceptance.py
CRITERIA: dict = {}


class RunCache:
    """Runs each acceptance scenario at most once per session."""

    def __init__(self):
        self._runs = {}

    def __call__(self, key):
        if key not in self._runs:
            preset, overrides = ACCEPTANCE_RUNS[key]
            sc = scn.with_overrides(scn.preset(preset), overrides)
            t0 = time.perf_counter()
            trajectory, summary = sim.run(sc)
            self._runs[key] = (sc, trajectory, summary, time.perf_counter() - t0)
        return self._runs[key]


@pytest.fixture(scope="session")
def criteria():
    return CRITERIA


@pytest.fixture(scope="session")
def runs():
    return RunCache()


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA, key=lambda c: (int(c[0]), c)):
        ok, detail = CRITERIA[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}")
