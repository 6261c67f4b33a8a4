import numpy as np
import pytest

from src.relaycap.channel import bsc_state_as_state_channel, bsc_state_channel, dump_channel
from src.relaycap.schemas import OptimizerConfig

_ENV_KEYS = (
    "RELAYCAP_TOLERANCE",
    "RELAYCAP_MAX_ITERATIONS",
    "RELAYCAP_RESTARTS",
    "RELAYCAP_SEED",
    "RELAYCAP_THREADS",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in _ENV_KEYS:
        monkeypatch.delenv(key, raising=False)
    monkeypatch.setenv("RELAYCAP_QUIET", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cfg():
    return OptimizerConfig()


@pytest.fixture
def bsc_state():
    return bsc_state_channel(0.2)


@pytest.fixture
def bsc_state_form():
    return bsc_state_as_state_channel(0.2)


@pytest.fixture
def bsc_state_file(tmp_path):
    path = tmp_path / "bsc_state.json"
    path.write_text(dump_channel(bsc_state_channel(0.2)), encoding="utf-8")
    return path
