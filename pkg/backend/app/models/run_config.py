"""
실행 설정 스키마
================
JSON 설정 문서 → RunConfig. 미지 키는 오류, 빠진 키는 기본값.
해석이 끝난 설정은 실행 디렉터리에 config.json 으로 되돌려 쓴다 (그대로 재실행 가능).
"""
import json
import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_core import PydanticCustomError

from ..core.errors import ConfigError
from ..services.domain_geometry import MIN_ANGULAR, MIN_RADIAL, sigma_mask


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _keyed_error(key: str, message: str) -> PydanticCustomError:
    """모델 검증기 오류에 키 이름을 싣는다 (loc 이 비어 있으므로)."""
    return PydanticCustomError("keyed_value", message, {"key": key})


class GridConfig(_Section):
    radial_count: int = Field(16, ge=MIN_RADIAL, description="내부 링 수")
    angular_count: int = Field(32, ge=MIN_ANGULAR, description="링당 각도 노드 수 (= 경계 노드 수)")
    exterior_inner: float = Field(1.5, gt=1.0, description="W 안쪽 반지름 (> r = 1)")
    exterior_outer: float = Field(2.0, description="W 바깥 반지름")
    exterior_radial: int = Field(8, ge=1)
    exterior_angular: int = Field(64, ge=MIN_ANGULAR)

    @model_validator(mode="after")
    def _annulus(self):
        if not self.exterior_outer > self.exterior_inner:
            raise _keyed_error("exterior_outer", "exterior_outer 는 exterior_inner 보다 커야 한다")
        return self


class PotentialConfig(_Section):
    kind: Literal["zero", "bump", "two-bumps"] = "bump"
    height: float = 5.0
    width: float = Field(0.3, gt=0)
    center: tuple[float, float] = (0.3, 0.0)
    second_center: tuple[float, float] = (-0.3, 0.0)
    support_radius: Optional[float] = Field(None, gt=0, le=0.9)


class SourceConfig(_Section):
    basis_size: int = Field(8, ge=1)
    width: Optional[float] = Field(None, gt=0)


class InversionSection(_Section):
    regularization_weight: float = Field(1e-3, gt=0)
    max_iterations: int = Field(20, ge=1)
    step_tolerance: float = Field(1e-6, ge=0)
    noise_level: float = Field(0.01, ge=0)
    seed: Optional[int] = None
    inverse_crime: bool = False


class ForwardSection(_Section):
    problem: Literal["exterior", "large"] = "exterior"
    source_index: int = Field(0, ge=0)
    datum_mode: int = Field(1, ge=0, description="g = cos(k·φ) 의 k (0 이면 상수)")


class CounterexampleSection(_Section):
    omega_radius: float = Field(0.4, gt=0, lt=1)
    degree: int = Field(10, ge=2)


class KernelsSection(_Section):
    sample_size: int = Field(64, ge=2)


class RunConfig(_Section):
    a: float = Field(0.5, gt=0, lt=1, description="분수 차수")
    grid: GridConfig = Field(default_factory=GridConfig)
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    source: SourceConfig = Field(default_factory=SourceConfig)
    sigma: tuple[float, float] = (0.0, math.pi)
    inversion: InversionSection = Field(default_factory=InversionSection)
    forward: ForwardSection = Field(default_factory=ForwardSection)
    counterexample: CounterexampleSection = Field(default_factory=CounterexampleSection)
    checks: list[str] = Field(default_factory=lambda: ["all"])
    kernels: KernelsSection = Field(default_factory=KernelsSection)
    output_dir: Optional[str] = None

    @field_validator("sigma")
    @classmethod
    def _sigma_order(cls, v):
        if not v[1] > v[0]:
            raise ValueError("sigma 는 φ₀ < φ₁ 구간이어야 한다")
        return v

    @model_validator(mode="after")
    def _sigma_nonempty(self):
        m = self.grid.angular_count
        angles = 2.0 * math.pi * np.arange(m) / m
        if not sigma_mask(angles, self.sigma).any():
            raise _keyed_error("sigma", "sigma 구간에 경계 노드가 없다")
        if self.potential.support_radius is not None:
            centers = [self.potential.center]
            if self.potential.kind == "two-bumps":
                centers.append(self.potential.second_center)
            reach = max(math.hypot(*c) for c in centers) + self.potential.width
            if self.potential.kind != "zero" and reach > self.potential.support_radius + 1e-12:
                raise _keyed_error("potential.support_radius", "potential 범프가 support_radius 를 벗어난다")
        return self


def _key_of(error: dict) -> str:
    parts = [str(p) for p in error.get("loc", ())]
    keyed = (error.get("ctx") or {}).get("key")
    if keyed:
        parts.append(keyed)
    return ".".join(parts) or "<root>"


def parse_config(text: str) -> RunConfig:
    """엄격 파싱. 실패하면 키 이름을 담은 한 줄 ConfigError."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError("malformed config: 최상위는 JSON 객체여야 한다")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = _key_of(first)
        if first.get("type") == "extra_forbidden":
            raise ConfigError(f"unknown key '{key}'", key=key) from exc
        raise ConfigError(f"invalid value for '{key}': {first.get('msg')}", key=key) from exc


def config_echo(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), ensure_ascii=False, sort_keys=True,
                      indent=2) + "\n"
