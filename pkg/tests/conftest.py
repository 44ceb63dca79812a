import numpy as np
import pytest
from hypothesis import settings

from obstacle_vmo.problems import Problem, solve_problem

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

BETA = 0.3


def halfspace_exact(x1, x2, beta=BETA, scale=0.5):
    return scale * np.maximum(x2 - beta, 0.0) ** 2


@pytest.fixture(scope="session")
def halfspace_problem():
    return Problem(n_cells=128, extent=2.0, boundary={"kind": "halfspace", "scale": 0.5, "beta": BETA})


@pytest.fixture(scope="session")
def halfspace_solution(halfspace_problem):
    return solve_problem(halfspace_problem)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_acceptance(key: str, ok: bool, detail: str) -> None:
    line = f"{key} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[2:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
