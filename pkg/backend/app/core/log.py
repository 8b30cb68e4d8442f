"""
로깅 설정
=========
서비스 모듈은 logging.getLogger(__name__) 만 쓰고, 핸들러 구성은 진입점에서 한 번 한다.
메시지는 "[태그] 내용" 형식 (grid / nystrom / oracle / respond / invert / verify / cli).
"""
import logging

from .config import settings

_FORMAT = "%(levelname)s %(name)s %(message)s"
_configured = False


def configure_logging(level: str | int | None = None) -> None:
    global _configured
    lvl = level if level is not None else settings.LOG_LEVEL
    if isinstance(lvl, str):
        lvl = getattr(logging, lvl.upper(), logging.INFO)
    root = logging.getLogger()
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        root.addHandler(handler)
        _configured = True
    root.setLevel(lvl)
