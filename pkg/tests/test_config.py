import os

import pytest
from pydantic import ValidationError

from src.relaycap.config import get_optimizer_config, get_worker_count


def test_defaults():
    cfg = get_optimizer_config()
    assert cfg.tolerance == 1e-9
    assert cfg.restarts == 4
    assert cfg.seed == 0


def test_environment_fallbacks(monkeypatch):
    monkeypatch.setenv("RELAYCAP_TOLERANCE", "1e-6")
    monkeypatch.setenv("RELAYCAP_RESTARTS", "16")
    monkeypatch.setenv("RELAYCAP_SEED", "42")
    cfg = get_optimizer_config()
    assert (cfg.tolerance, cfg.restarts, cfg.seed) == (1e-6, 16, 42)


def test_explicit_arguments_win(monkeypatch):
    monkeypatch.setenv("RELAYCAP_MAX_ITERATIONS", "50")
    assert get_optimizer_config(max_iterations=300).max_iterations == 300
    assert get_optimizer_config().max_iterations == 50


def test_invalid_values_are_rejected(monkeypatch):
    monkeypatch.setenv("RELAYCAP_TOLERANCE", "0")
    with pytest.raises(ValidationError):
        get_optimizer_config()


def test_worker_count(monkeypatch):
    assert get_worker_count() == (os.cpu_count() or 1)
    monkeypatch.setenv("RELAYCAP_THREADS", "3")
    assert get_worker_count() == 3
    monkeypatch.setenv("RELAYCAP_THREADS", "-1")
    with pytest.raises(ValueError):
        get_worker_count()
