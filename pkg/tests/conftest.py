import random

import pytest

from ampvrp.io import parse_cmt
from helpers import cmt_path, has_cmt


@pytest.fixture(scope="session")
def cmt01():
    if not has_cmt("cmt01"):
        pytest.skip("cmt01.txt not present in data/cmt")
    return parse_cmt(cmt_path("cmt01"))


@pytest.fixture
def rng():
    return random.Random(0)
