import numpy as np
import pytest
from dataclasses import dataclass

from poislim.intensity import IntensityModel, ParameterInterval


@dataclass(frozen=True)
class FlatModel(IntensityModel):
    """lambda(theta, t) = level, independent of theta (tie-break test bed)."""

    level: float = 1.0
    theta_interval: ParameterInterval = ParameterInterval(0.2, 1.7)

    def _catalog_id(self):
        return "FLAT"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        return self.level

    def _value(self, theta, t, theta_side=0):
        return np.full(np.broadcast_shapes(np.shape(theta), np.shape(t)), self.level)

    def _dtheta(self, theta, t, order, side):
        return np.zeros_like(t)


@pytest.fixture
def flat_model():
    return FlatModel()
