import numpy as np
import pytest

from orthofair.matrix import standardize

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def correlated_instance(seed, n, q, p, strength=1.0):
    """Standardized (A, B) with A partly driven by B."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, p))
    A = strength * B @ rng.standard_normal((p, q)) + rng.standard_normal((n, q))
    return standardize(A)[0], standardize(B)[0]


@pytest.fixture
def small_instance():
    return correlated_instance(0, 40, 5, 2)
