import numpy as np
import pytest

from dyadica.space import PointMeasure, build_space, generate_space


@pytest.fixture
def segment4():
    space, mu = generate_space("integer_segment_counting", n=4)
    return space, mu


@pytest.fixture
def segment16():
    space, mu = generate_space("integer_segment_counting", n=16)
    return space, mu


@pytest.fixture
def snowflake8():
    space, mu = generate_space("snowflake_power", n=8, power=2.0)
    return space, mu


@pytest.fixture
def tree27():
    space, mu = generate_space("ultrametric_tree", depth=3, branching=3, ratio=1.0 / 96.0)
    return space, mu


@pytest.fixture
def two_point():
    space = build_space(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return space, PointMeasure(np.ones(2))


def random_masses(rng, n, zero_fraction=0.0):
    """Integer masses so that reordered partial sums stay exactly equal."""
    m = rng.integers(1, 20, size=n).astype(float)
    if zero_fraction > 0:
        kill = rng.random(n) < zero_fraction
        if kill.all():
            kill[rng.integers(0, n)] = False
        m[kill] = 0.0
    return m
