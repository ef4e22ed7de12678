import numpy as np
import pytest
from hypothesis import settings

from mgbarrier.problems import ProblemSpec, build_problem

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_problem():
    """Tiny 2-level p=1.5 problem shared by solver-level tests."""
    return build_problem(ProblemSpec(p=1.5, alpha=2, levels=2, cells0=2))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
