import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from attackkf import AttackParams, GaussianBelief, LinearGaussianModel  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    def record(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def bench_attack():
    return AttackParams(
        alpha_a=0.3, alpha_b=0.7, alpha_c=0.9, alpha_m=0.1,
        mu_a=[0.7, 0.9], Sigma_a=np.diag([1.0, 0.5]), mu_m=0.95, sigma_m_sq=0.01,
    )


@pytest.fixture
def bench_prior():
    return GaussianBelief([250.0, 150.0, 12.0, 17.0], np.diag([100.0, 100.0, 16.0, 16.0]))


@pytest.fixture
def pos_model():
    H = np.hstack([np.eye(2), np.zeros((2, 2))])
    return LinearGaussianModel(np.eye(4), H, 0.01 * np.eye(4), np.diag([12.0, 12.0]))
