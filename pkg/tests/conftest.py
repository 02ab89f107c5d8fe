from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jacobispec.operator_core import CoefficientModel, build_whole_line
from jacobispec.scenarios import random_model
from jacobispec.spectral_measures import eigendecompose

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def free():
    return CoefficientModel.free()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[0, 1, 2])
def random_system(request):
    """Eigensystem of a random truncation on [-10, 10]."""
    model = random_model(request.param, n=10)
    return eigendecompose(build_whole_line(model, 10))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance(capsys):
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
