import pathlib

import numpy as np
import pytest

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def data_dir():
    d = REPO_ROOT / "data" / "fashion"
    if not d.exists():
        pytest.skip("committed dataset not present")
    return d
