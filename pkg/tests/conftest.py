import os
import sys

import numpy as np
import pytest
import torch

torch.set_num_threads(1)

sys.path.insert(0, os.path.dirname(__file__))

CACHE = os.path.join(os.path.dirname(__file__), "..", ".acceptance_cache")


@pytest.fixture(scope="session")
def cache_dir():
    os.makedirs(CACHE, exist_ok=True)
    return os.path.abspath(CACHE)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
