from pathlib import Path

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    APP_NAME: str = "fraclab"
    LOG_LEVEL: str = "INFO"

    # 실행 산출물 기본 위치 (--out 또는 설정 파일 output_dir 가 우선)
    OUTPUT_DIR: Path = Path("runs")

    # 재현성: 모든 의사난수는 이 시드에서 출발한다.
    # 보고서에 기록되므로 같은 시드 + 같은 설정이면 CSV 가 바이트 단위로 같아야 한다.
    DEFAULT_SEED: int = 20240601

    # CSV 부동소수 유효숫자 (17자리 = float64 왕복 보장)
    CSV_DIGITS: int = 17

    # 선형계 자기검증 한계
    CONDITION_LIMIT: float = 1e12
    RESIDUAL_LIMIT: float = 1e-10

    # 그린 행렬·트레이스 연산자 캐시 유지 시간(초)
    OPERATOR_CACHE_TTL: float = 600.0

    SCHEMA_VERSION: str = "1.0"

    class Config:
        env_file = ".env"
        env_prefix = "FRACLAB_"


settings = Settings()

# 자주 쓰는 파생 값
CSV_FLOAT_FORMAT = f".{settings.CSV_DIGITS}g"
SCHEMA_VERSION = settings.SCHEMA_VERSION
CONDITION_LIMIT = settings.CONDITION_LIMIT
RESIDUAL_LIMIT = settings.RESIDUAL_LIMIT


def format_float(value: float) -> str:
    """CSV 한 칸 - 고정 유효숫자, -0.0 은 0 으로 정규화."""
    v = float(value)
    if v == 0.0:
        v = 0.0
    return format(v, CSV_FLOAT_FORMAT)
