import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bellkit.core import Behavior, HvModel, Scenario, SettingPolicy  # noqa: E402
from bellkit.geometry import pr_box  # noqa: E402
from bellkit.quantum import tsirelson_singlet  # noqa: E402

S2222 = Scenario(2, 2, 2, 2)

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def point_mass(x, y, scenario=S2222):
    """Deterministic behavior giving outcome pair (x, y) for every setting pair."""
    p = np.zeros(scenario.shape)
    p[:, :, x, y] = 1.0
    return Behavior(scenario, p)


@pytest.fixture
def singlet():
    return tsirelson_singlet()


@pytest.fixture
def pr():
    return pr_box()


@pytest.fixture
def anticorrelated_mixture():
    """Two components, each a deterministic product: (0, 1) or (1, 0), weights 1/2."""
    return HvModel.from_arrays([0.5, 0.5], [point_mass(0, 1).p, point_mass(1, 0).p])


@pytest.fixture
def signaling_model():
    """Alice's marginal depends on Bob's setting: P(X=0|a,b) = 0.6 if b == 0 else 0.4."""
    p = np.zeros((2, 2, 2, 2))
    for b in range(2):
        px = (0.6, 0.4) if b == 0 else (0.4, 0.6)
        p[:, b] = np.outer(px, (0.5, 0.5))
    return HvModel.single(Behavior(S2222, p))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
