import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
UCI = ROOT / "data" / "uci"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def uci_dir():
    return UCI
