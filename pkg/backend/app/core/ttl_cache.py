"""
경량 TTL 캐시 - 격자별 조립 연산자용
=====================================
그린 행렬(N×N, betainc 호출 N² 회)과 트레이스 연산자는 격자와 차수 a 만의 함수다.
응답 행렬의 열마다, 가우스-뉴턴 반복마다 다시 조립할 이유가 없으므로 프로세스 내 dict 로
TTL 캐시한다. 키는 격자 명세의 canonical JSON sha256 (fingerprint).

사용:
    op = cached(("green", fingerprint(grids.spec), a), lambda: assemble(...))
"""
import hashlib
import json
import time
from typing import Any, Callable, Optional

from .config import settings

_STORE: dict[str, tuple[float, Any]] = {}
DEFAULT_TTL = settings.OPERATOR_CACHE_TTL


def fingerprint(obj: Any) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _key(key: Any) -> str:
    return key if isinstance(key, str) else fingerprint(key)


def ttl_get(key: Any) -> Optional[Any]:
    k = _key(key)
    hit = _STORE.get(k)
    if not hit:
        return None
    ts, value = hit
    if time.time() - ts > DEFAULT_TTL:
        _STORE.pop(k, None)
        return None
    return value


def _sweep(now: float) -> None:
    stale = [k for k, (ts, _) in _STORE.items() if now - ts > DEFAULT_TTL]
    for k in stale:
        del _STORE[k]


def ttl_set(key: Any, value: Any) -> Any:
    """쓰기 때마다 만료 항목을 함께 비운다."""
    now = time.time()
    _sweep(now)
    _STORE[_key(key)] = (now, value)
    return value


def ttl_clear() -> None:
    _STORE.clear()


def cached(key: Any, factory: Callable[[], Any]) -> Any:
    value = ttl_get(key)
    if value is not None:
        return value
    return ttl_set(key, factory())
