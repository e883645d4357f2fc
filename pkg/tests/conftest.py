from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dqcsched.costmodel import default_training_graphs, train  # noqa: E402
from dqcsched.netgraph import REFERENCE_CAPACITIES, build_fat_tree, shuffled_capacities  # noqa: E402


@pytest.fixture(scope="session")
def trained_model():
    return train(default_training_graphs())


@pytest.fixture(scope="session")
def reference_net():
    return build_fat_tree(4, 4, shuffled_capacities(REFERENCE_CAPACITIES, 0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
