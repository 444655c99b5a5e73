import numpy as np
import pytest

from sketchscene import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile numba kernels once so timed tests measure steady-state speed.
    kernels.warmup()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid:
                name = nodeid.split("::")[-1]
                outcomes[name] = "PASS" if status == "passed" else "FAIL"
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    def criterion_number(name):
        return int(name.split("_")[2])
    for name in sorted(outcomes, key=criterion_number):
        terminalreporter.write_line(f"{outcomes[name]}  {name}")
