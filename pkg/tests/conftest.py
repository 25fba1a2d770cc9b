import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import mcflow as mc


@pytest.fixture(scope="session")
def unit_ball():
    return mc.ball(1.0)


@pytest.fixture(scope="session")
def grid16(unit_ball):
    return mc.build_grid(unit_ball, 1 / 16)


@pytest.fixture(scope="session")
def grid32(unit_ball):
    return mc.build_grid(unit_ball, 1 / 32)
