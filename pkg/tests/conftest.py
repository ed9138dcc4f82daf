import numpy as np
import pytest

from sppremote import SolverConfig, paper_model, solve_chain

_acceptance_lines: list[str] = []


def record_acceptance(name: str, ok: bool, detail: str = "") -> None:
    """Collect one pass/fail line per acceptance criterion for the summary."""
    line = f"{name}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def model():
    return paper_model()


@pytest.fixture(scope="session")
def chain5(model):
    """N=5 chain at the default solver configuration; shared by many tests."""
    return solve_chain(5, 10.0, model, SolverConfig(seed=101))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
