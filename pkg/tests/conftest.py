import math

import numpy as np
import pytest

from resnf import build_seagull
from resnf.normal_form import normalize

PI = math.pi
ALL_CONFIGS = [(a, b, c) for a in (0.0, PI) for b in (0.0, PI) for c in (0.0, PI)]


@pytest.fixture(scope="session")
def seagull():
    """(model, chart, ham) for gamma = 1, I* = 1."""
    return build_seagull(1.0, 1.0, s_max=3)


@pytest.fixture(scope="session")
def seagull_neg():
    return build_seagull(-1.0, 1.0, s_max=3)


@pytest.fixture(scope="session")
def nf_r2_zero(seagull):
    _, _, ham = seagull
    return normalize(ham, 2, [0.0, 0.0, 0.0], require_melnikov=False)


@pytest.fixture(scope="session")
def nf_r2_pi(seagull):
    _, _, ham = seagull
    return normalize(ham, 2, [PI, PI, PI], require_melnikov=False)


@pytest.fixture(scope="session")
def nf_r1_zero(seagull):
    _, _, ham = seagull
    return normalize(ham, 1, [0.0, 0.0, 0.0], require_melnikov=False)
