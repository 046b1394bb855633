import numpy as np
import pytest

from synthface import build_toy_model, default_camera


@pytest.fixture(scope="session")
def small_model():
    """Compact toy model shared by fast tests."""
    return build_toy_model(42, vertex_budget=300, shape_components=6,
                           color_components=4, expression_components=3)


@pytest.fixture(scope="session")
def default_model():
    """Default-size toy model (matches the preset 'toy:<seed>' assets)."""
    return build_toy_model(20260809)


@pytest.fixture
def camera128():
    return default_camera(128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
