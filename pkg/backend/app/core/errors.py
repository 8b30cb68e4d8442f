"""
예외 계층
=========
서비스 모듈은 모두 FraclabError 하위 예외만 던진다. CLI 는 exit_code 로 종료 코드를 정한다.
  · 2 - 설정/입력 오류 (키 누락·범위 위반·미지 키·산출물 부재)
  · 1 - 수치 실패 (특이 커널, 조건수 초과, 외삽 불수렴, 선탐색 실패 ...)
"""


class FraclabError(Exception):
    exit_code = 1


class InvalidParameterError(FraclabError, ValueError):
    """생성자 입력이 정의역을 벗어남 (a ∉ (0,1), 격자 수 미달, W̄ ∩ Ω̄ ≠ ∅ 등)."""
    exit_code = 2


class ConfigError(FraclabError):
    exit_code = 2

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class MissingArtifactError(ConfigError):
    pass


class NumericalFailure(FraclabError):
    exit_code = 1


class SingularityError(NumericalFailure):
    """커널 특이점 - 두 점이 일치."""


class QuadratureRefusal(NumericalFailure):
    """p.v. 오라클이 비매끄러운 면에 너무 가까운 점에서 호출됨."""


class WrongExponentError(NumericalFailure):
    """경계 비율 외삽이 수렴하지 않음 - 지수 가정이 틀렸다."""


class ConditioningError(NumericalFailure):
    """(I + G M_q) 조건수 한계 초과 또는 잔차 인증 실패."""

    def __init__(self, message: str, condition: float | None = None, residual: float | None = None):
        super().__init__(message)
        self.condition = condition
        self.residual = residual


class DegenerateProjectionError(NumericalFailure):
    """반례 구성에서 조화함수 직교 사영이 0 으로 붕괴."""


class DivergenceError(NumericalFailure):
    """가우스-뉴턴 선탐색 실패. 이력을 함께 싣는다."""

    def __init__(self, message: str, history: list[float] | None = None):
        super().__init__(message)
        self.history = list(history or [])
