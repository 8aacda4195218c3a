import numpy as np
import pytest

from surrogate_ate import ExperimentalSample, ObservationalSample, SingleSample


class FixedScore:
    """Test stub: a 'fitted score' that returns prescribed per-row values."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def predict(self, s, x=None):
        n = np.atleast_2d(np.asarray(s)).shape[0]
        assert n == len(self.values)
        return self.values.copy()

    def to_dict(self):
        return {"type": "fixed", "values": self.values.tolist()}


class FixedIndex(FixedScore):
    pass


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_exp():
    return ExperimentalSample(
        w=[1, 0, 1, 0, 1, 0],
        s=[[0.5], [-0.2], [1.1], [0.3], [-0.4], [0.9]],
        x=[[1.0], [0.0], [0.5], [1.5], [-0.5], [0.2]],
    )


@pytest.fixture
def small_obs():
    return ObservationalSample(
        y=[1.0, 0.0, 2.0, 1.5, -0.5, 0.7, 1.2, 0.1],
        s=[[0.4], [-0.1], [1.2], [0.8], [-0.6], [0.5], [1.0], [0.0]],
        x=[[0.9], [0.1], [0.6], [1.2], [-0.3], [0.4], [0.8], [1.1]],
    )


@pytest.fixture
def small_single():
    return SingleSample(
        w=[1, 1, 1, 1, 0, 0, 0, 0],
        y=[3.0, 4.0, 5.0, 4.0, 1.0, 2.0, 1.0, 2.0],
        s=[[1.0], [1.2], [1.4], [1.1], [0.2], [0.4], [0.1], [0.3]],
        x=None,
    )
