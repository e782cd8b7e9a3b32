import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stablelike.model import (IndexField, KernelField, MatrixField, OperatorSpec,
                              make_bass_spec, make_sde_spec)

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def presets(d=1):
    """The three operator families used across the suite (constant, Bass bump, SDE)."""
    A = MatrixField.diagonal(np.full(d, 1.5), np.full(d, 0.3), np.eye(d))
    return {
        "constant": OperatorSpec(d, IndexField.constant(d, 1.5), KernelField.constant(d, 0.7)),
        "bass_bump": make_bass_spec(d, IndexField.bump(d, 1.3, 0.2)),
        "sde": make_sde_spec(d, 1.4, A),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def record(number, ok, detail):
    """Store the verdict of acceptance criterion ``number`` and echo it."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
