import os
import sys

import numpy as np
import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)  # for ``oracles``

CORPUS = os.path.join(os.path.dirname(HERE), "corpus")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def corpus_dir():
    return CORPUS
