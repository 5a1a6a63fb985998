import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cubespline.oracle import hand_curve

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# second derivatives of the hand curve, natural ends, six decimals
HAND_YPP_TABLE = [0.0, 306.924794, -1213.299177, 2450.276370, -679.188305, 310.152841,
                  -80.047486, 12.113742, -5.706845, 0.029250, -1.048158, -1.612180, 0.0]


@pytest.fixture
def hand():
    return hand_curve()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_curve(rng, n, spread=(0.05, 2.0)):
    """Curve with random knot gaps in ``spread`` and values in [-1, 1]."""
    from cubespline import ControlCurve
    gaps = rng.uniform(*spread, n - 1)
    x = np.concatenate([[rng.uniform(-1, 1)], gaps]).cumsum()
    return ControlCurve(x, rng.uniform(-1, 1, n))
