import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from taam.data import SBMConfig, generate_sbm_sequence  # noqa: E402


@pytest.fixture(scope="session")
def small_ds():
    return generate_sbm_sequence(SBMConfig(n_tasks=3, nodes_per_class=15, feature_dim=8), 7)


@pytest.fixture(scope="session")
def criterion_ds():
    """The 5-task stream used by the headline checks."""
    return generate_sbm_sequence(SBMConfig(n_tasks=5, classes_per_task=2, nodes_per_class=40,
                                           p_in=0.2, p_out=0.02, sep=3.0), 1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k, (ok, detail) in sorted(mod.RESULTS.items()):
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
