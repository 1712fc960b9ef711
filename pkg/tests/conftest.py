from __future__ import annotations

import numpy as np
import pytest

from model_spaces import SpaceSpec, make_space
from riemann import ChartMetric


def preset(name: str) -> ChartMetric:
    return make_space(SpaceSpec.preset(name))


@pytest.fixture(scope="session")
def r3() -> ChartMetric:
    return preset("r3")


@pytest.fixture(scope="session")
def s2() -> ChartMetric:
    return preset("s2")


@pytest.fixture(scope="session")
def s3() -> ChartMetric:
    return preset("s3")


@pytest.fixture(scope="session")
def h3() -> ChartMetric:
    return preset("h3")


@pytest.fixture(scope="session")
def s2xr() -> ChartMetric:
    return preset("s2xr")


@pytest.fixture(scope="session")
def ellipsoid() -> ChartMetric:
    return preset("ellipsoid")


@pytest.fixture(scope="session")
def dr21() -> ChartMetric:
    return preset("dr21")


@pytest.fixture(scope="session")
def dr43() -> ChartMetric:
    return preset("dr43")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.normal(size=n)
    return u / np.linalg.norm(u)
