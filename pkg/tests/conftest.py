import numpy as np
import pytest

from hawkesmix.model import EventSequence, HawkesParams, MixtureModel


def random_params(rng, C, beta=None, scale=0.3):
    beta = rng.uniform(0.5, 2.0) if beta is None else beta
    return HawkesParams(rng.uniform(0.1, 1.0, C), rng.uniform(0.0, scale, (C, C)), beta)


def random_model(rng, K, C, beta=None):
    beta = rng.uniform(0.5, 2.0) if beta is None else beta
    pi = rng.dirichlet(np.ones(K))
    return MixtureModel(tuple(random_params(rng, C, beta) for _ in range(K)), pi)


def random_sequence(rng, C, I, T=None, id=""):
    T = rng.uniform(2.0, 10.0) if T is None else T
    times = np.sort(rng.uniform(0, T, I))
    while I > 1 and np.any(np.diff(times) <= 0):
        times = np.sort(rng.uniform(0, T, I))
    times = np.where(times <= 0, T / 2, times)
    return EventSequence(times, rng.integers(0, C, I), T, C, id=id)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
