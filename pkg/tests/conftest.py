"""
Pytest configuration and fixtures for TrapTP simulator tests.
"""

import os

import pytest

from app.models.traptp import SchemeParams
from app.services.config_service import config_service
from app.services.css_code import get_code
from app.services.rng_service import rng_service
from app.services.trapcode_service import trapcode_service
from app.services.traptp_service import traptp_service

TEST_SEED = 20240917


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Run every test without TRAPTP_* variables from the outer environment."""
    for name in list(os.environ):
        if name.startswith("TRAPTP_"):
            monkeypatch.delenv(name, raising=False)
    config_service.reload()
    yield
    monkeypatch.undo()
    config_service.reload()


@pytest.fixture
def rng():
    """Fresh deterministic random stream."""
    return rng_service.stream(TEST_SEED)


@pytest.fixture
def code():
    """Level-1 Steane code (m = 7)."""
    return get_code(1)


@pytest.fixture
def small_budgets():
    """One T, one P and one H resource."""
    return SchemeParams(level=1, t=1, p=1, h=1)


@pytest.fixture
def trapcode_key(code, rng):
    """Two-slot trap-code key."""
    return trapcode_service.keygen(2, code, rng)


@pytest.fixture
def traptp_keys(small_budgets, rng):
    """(sk, evk) with one resource of each kind."""
    return traptp_service.keygen(small_budgets, rng)


@pytest.fixture
def eager_celery(monkeypatch):
    """Run Celery tasks in-process."""
    from worker.celery_app import celery_app

    monkeypatch.setattr(celery_app.conf, "task_always_eager", True)
    monkeypatch.setattr(celery_app.conf, "task_eager_propagates", True)
    return celery_app
