import json
import math
from pathlib import Path

import numpy as np
import pytest

from aggdiff import make_grid

SIGMA = 0.1 / math.sqrt(3.0)
S2 = SIGMA**2
ORACLE_FILE = Path(__file__).parent / "oracles" / "oracles.json"


@pytest.fixture(scope="session")
def oracles():
    with open(ORACLE_FILE) as fh:
        return json.load(fh)


@pytest.fixture
def grid512():
    return make_grid(1.0, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs taking more than a few seconds")
    config.addinivalue_line("markers", "acceptance: the top-level acceptance criteria")
