import numpy as np
import pytest

from bnsl.fields import GaussianFieldModel

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""

    def record(number, passed, detail):
        ACCEPTANCE_LINES.append((number, f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def field16():
    return GaussianFieldModel(mean=0.0, amplitude=1.0, length_scale=0.35).prepare(16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
