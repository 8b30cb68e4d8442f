"""
공통 계층 테스트
================
설정 · 예외 종료 코드 · TTL 캐시 · 로깅 구성.

실행: cd backend && python -m pytest tests -q
"""
import logging
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core import ttl_cache  # noqa: E402
from app.core.config import CSV_FLOAT_FORMAT, Settings, settings  # noqa: E402
from app.core.errors import (ConditioningError, ConfigError, DivergenceError,  # noqa: E402
                             FraclabError, InvalidParameterError, MissingArtifactError)
from app.core.log import configure_logging  # noqa: E402


def test_settings_defaults():
    assert settings.CSV_DIGITS == 17
    assert CSV_FLOAT_FORMAT == ".17g"
    assert settings.DEFAULT_SEED == 20240601


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("FRACLAB_DEFAULT_SEED", "7")
    assert Settings().DEFAULT_SEED == 7


def test_exit_codes():
    assert InvalidParameterError("x").exit_code == 2
    assert isinstance(InvalidParameterError("x"), ValueError)
    assert MissingArtifactError("x", key="f").exit_code == 2
    assert isinstance(MissingArtifactError("x"), ConfigError)
    err = ConditioningError("x", condition=1e13, residual=1e-3)
    assert err.exit_code == 1 and err.condition == 1e13
    assert DivergenceError("x", history=[3.0, 2.0]).history == [3.0, 2.0]
    assert all(issubclass(c, FraclabError) for c in (ConfigError, ConditioningError))


def test_fingerprint_is_order_independent():
    assert ttl_cache.fingerprint({"a": 1, "b": [1, 2]}) == ttl_cache.fingerprint({"b": [1, 2], "a": 1})
    assert ttl_cache.fingerprint({"a": 1}) != ttl_cache.fingerprint({"a": 2})


def test_cache_builds_once_and_clears():
    ttl_cache.ttl_clear()
    calls = []

    def factory():
        calls.append(1)
        return object()

    first = ttl_cache.cached(("sample", 1), factory)
    assert ttl_cache.cached(("sample", 1), factory) is first
    assert len(calls) == 1
    ttl_cache.ttl_clear()
    assert ttl_cache.ttl_get(("sample", 1)) is None


def test_cache_expires(monkeypatch):
    ttl_cache.ttl_set("k", 5)
    monkeypatch.setattr(ttl_cache, "DEFAULT_TTL", -1.0)
    assert ttl_cache.ttl_get("k") is None


def test_cache_write_sweeps_expired_entries(monkeypatch):
    ttl_cache.ttl_clear()
    for i in range(5):
        ttl_cache.ttl_set(("old", i), i)
    monkeypatch.setattr(ttl_cache, "DEFAULT_TTL", -1.0)
    ttl_cache.ttl_set("fresh", 1)
    assert list(ttl_cache._STORE) == ["fresh"]
    monkeypatch.setattr(ttl_cache, "DEFAULT_TTL", 3600.0)
    ttl_cache.ttl_set("next", 2)
    assert len(ttl_cache._STORE) == 2
    ttl_cache.ttl_clear()


def test_configure_logging_is_idempotent():
    root = logging.getLogger()
    configure_logging("DEBUG")
    count = len(root.handlers)
    configure_logging("warning")
    assert len(root.handlers) == count
    assert root.level == logging.WARNING
