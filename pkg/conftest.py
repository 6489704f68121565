"""
Shared pytest fixtures.

Small hand-built linear models with closed-form answers, and a digits8x8
classifier trained once per session.
"""

import numpy as np
import pytest

from services.classifier import Activation, Layer, Model, TrainConfig, train_sgd
from services.datasets import generate_digits, split_dataset


def linear(weights, bias=None) -> Model:
    """Single identity layer z = Wx + b."""
    weights = np.asarray(weights, dtype=np.float64)
    if bias is None:
        bias = np.zeros(weights.shape[0])
    return Model((Layer(weights, bias, Activation.IDENTITY),))


def random_mlp(rng: np.random.Generator, sizes) -> Model:
    """ReLU network with Gaussian weights and biases."""
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = Activation.IDENTITY if i == len(sizes) - 2 else Activation.RELU
        layers.append(Layer(rng.normal(size=(fan_out, fan_in)), rng.normal(size=fan_out), act))
    return Model(tuple(layers))


@pytest.fixture
def make_linear():
    return linear


@pytest.fixture
def make_mlp():
    return random_mlp


@pytest.fixture
def binary_model() -> Model:
    """z = (0, 3 x0 + 4 x1); at x = (1, 1) the margin is 7."""
    return linear([[0.0, 0.0], [3.0, 4.0]])


@pytest.fixture
def binary_point() -> np.ndarray:
    return np.array([1.0, 1.0])


@pytest.fixture(scope="session")
def digits_split():
    dataset = generate_digits(1797, seed=0)
    return split_dataset(dataset, 0.25, seed=0)


@pytest.fixture(scope="session")
def digits_model(digits_split):
    train, _ = digits_split
    return train_sgd(train, [64, 32, 10], TrainConfig(seed=0))
