"""Performance test fixtures."""

import numpy as np
import pytest

from discrete_energy.models import ConvEnergy, MlpEnergy
from discrete_energy.tensor import Tensor


@pytest.fixture
def mlp_pair():
    rng = np.random.default_rng(0)
    model = MlpEnergy((2, 200, 200, 1), seed=0)
    return model, Tensor(rng.standard_normal((200, 2))), Tensor(rng.standard_normal((200, 2)))


@pytest.fixture
def conv_pair():
    rng = np.random.default_rng(1)
    model = ConvEnergy(dx=0.2, hidden=200, seed=0)
    return model, Tensor(rng.standard_normal((20, 50))), Tensor(rng.standard_normal((20, 50)))
