import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.config import settings
from src.cq.service import build_context, radau_tableau
from src.mesh.service import generate_icosphere, generate_torus
from src.trace_space.service import build_rt0

ORIGIN = np.zeros(3)
OBSERVATION_POINT = np.array([2.0, 0.0, 0.0])
COMPLEX_FREQUENCY = 2.0 + 3.0j


@pytest.fixture(scope="session")
def sphere0():
    return generate_icosphere(0)


@pytest.fixture(scope="session")
def sphere1():
    return generate_icosphere(1)


@pytest.fixture(scope="session")
def small_torus():
    return generate_torus(0.8, 0.2, 8, 4)


@pytest.fixture(scope="session")
def space0(sphere0):
    return build_rt0(sphere0)


@pytest.fixture(scope="session")
def space1(sphere1):
    return build_rt0(sphere1)


@pytest.fixture(scope="session")
def context_m2():
    return build_context(radau_tableau(2), steps=16, final_time=2.0)


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="function")
def isolated_cache(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setattr(settings, "cache_dir", str(cache))
    return cache
