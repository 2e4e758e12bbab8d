import random

import pytest
from hypothesis import HealthCheck, settings

from spreadmenot.ecc import SECP128R1, SECP160R1, SECP192K1, SECP256K1, TOY

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ALL_CURVES = (SECP128R1, SECP160R1, SECP192K1, SECP256K1, TOY)
CURVE_IDS = [c.curve_id.value for c in ALL_CURVES]


@pytest.fixture(params=ALL_CURVES, ids=CURVE_IDS)
def curve(request):
    return request.param


@pytest.fixture(params=ALL_CURVES[:4], ids=CURVE_IDS[:4])
def std_curve(request):
    return request.param


@pytest.fixture
def rng():
    return random.Random(1234)
