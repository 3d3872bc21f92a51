import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def all_sequences(A, n):
    """Every sequence of X^n in lexicographic order, as an (A^n, n) array."""
    return np.array(list(itertools.product(range(A), repeat=n)), dtype=np.int64).reshape(-1, n)


@pytest.fixture
def configs_dir():
    return CONFIGS


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
