import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import evauction as ev


@pytest.fixture(scope="session")
def s1():
    """The unit fixture: one location (M=1, C=2, E=1), T=4, flat supply."""
    scenario, users = ev.build_preset("s1")
    return scenario, users


@pytest.fixture(scope="session")
def downtown():
    """The nine-location preset with its seed-42 population."""
    return ev.build_preset("downtown9", seed=42)
