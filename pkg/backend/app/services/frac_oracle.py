"""
분수 라플라시안 점별 오라클
===========================
명시적으로 주어진 함수 u 에 대해 (−Δ)^a u(x) 를 주치값 적분
    C_{n,a} p.v.∫ (u(x) − u(y)) / |x−y|^{n+2a} dy
으로 독립 평가한다. 솔버 출력은 모두 이 모듈로 인증한다.

x 중심 광선 분해 (y = x + tθ):
  · 근접장 [0, ρ]: 대칭 2차 차분 D(t) = (u(x+tθ)+u(x−tθ)−2u(x))/(2t²) 를
    가중 t^{1−2a} Gauss-Jacobi 로 적분 (2차 테일러 차감과 동치)
  · 원거리장 [ρ, ∞): u(x)ρ^{−2a}/(2a) − ∫_ρ^∞ u(x+tθ) t^{−1−2a} dt
    지지 원을 벗어나는 지점 t₁ 에서 (t₁−t)^β 거동은 Gauss-Jacobi 가중으로 흡수,
    전역 매끄러운 u 는 로그 치환 [ρ, 50] + 꼬리 보정 u(x+Tθ)T^{−2a}/(2a).
  · ρ = min(0.1, 비매끄러운 면까지 거리의 절반)
오차 추정은 quad_level 과 한 단계 낮은 수준의 차이.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import j0, roots_jacobi, roots_legendre

from ..core.errors import InvalidParameterError, QuadratureRefusal, WrongExponentError
from .domain_geometry import as_order
from .kernels import kernel_constants

logger = logging.getLogger(__name__)

NEAR_RADIUS = 0.1
TRUNCATION_RADIUS = 50.0
CLEARANCE_FLOOR = 1e-6
RATIO_LEVELS = (1e-2, 1e-3, 1e-4)
RATIO_SPREAD = 0.10


class Smoothness(str, Enum):
    GLOBALLY_SMOOTH = "globally-smooth"
    INTERIOR_SMOOTH_ZERO_EXTERIOR = "interior-smooth-zero-exterior"
    LARGE_CLASS = "large-class"


@dataclass(frozen=True)
class ProfileFunction:
    """평가기 + 매끄러움 태그. 지지 원 밖에서는 0 (전역 매끄러운 경우 제외).

    exponent 는 지지 경계 근처 거동 (R²−|y−c|²)^exponent 의 지수.
    """
    evaluator: Callable[[np.ndarray], np.ndarray]
    smoothness_tag: Smoothness
    support_radius: float = math.inf
    exponent: float = 0.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        tag = Smoothness(self.smoothness_tag)
        object.__setattr__(self, "smoothness_tag", tag)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if tag is not Smoothness.GLOBALLY_SMOOTH:
            if not (0 < self.support_radius < math.inf):
                raise InvalidParameterError("지지 반경이 유한한 양수여야 한다")
            if not self.exponent > -1.0:
                raise InvalidParameterError(f"exponent={self.exponent}: > −1 이어야 적분 가능")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def compact(self) -> bool:
        return self.smoothness_tag is not Smoothness.GLOBALLY_SMOOTH

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if not self.compact:
            return np.asarray(self.evaluator(pts), dtype=float)
        rel = pts - np.asarray(self.center)
        inside = np.sum(rel * rel, axis=-1) < self.support_radius ** 2
        out = np.zeros(pts.shape[:-1])
        if np.any(inside):
            out[inside] = self.evaluator(pts[inside])
        return out

    def scaled(self, factor: float) -> "ProfileFunction":
        ev = self.evaluator
        return ProfileFunction(lambda p: factor * ev(p), self.smoothness_tag,
                               self.support_radius, self.exponent, self.center)


@dataclass(frozen=True)
class OracleValue:
    value: float
    error: float        # |v(level) − v(level−1)|
    magnitude: float    # 절대값 기여의 합 - 잔차 척도
    level: int


# =============================================================================
# 대표 프로파일
# =============================================================================

def _gap(p, center, radius):
    rel = np.asarray(p, dtype=float) - np.asarray(center)
    return radius ** 2 - np.sum(rel * rel, axis=-1)


def constant_profile(value: float = 1.0, dim: int = 2) -> ProfileFunction:
    return ProfileFunction(lambda p: np.full(np.shape(p)[:-1], float(value)),
                           Smoothness.GLOBALLY_SMOOTH, center=(0.0,) * dim)


def gaussian_profile(dim: int = 2) -> ProfileFunction:
    return ProfileFunction(lambda p: np.exp(-np.sum(np.asarray(p) ** 2, axis=-1)),
                           Smoothness.GLOBALLY_SMOOTH, center=(0.0,) * dim)


def weighted_profile(a, power: float, factor: Callable | None = None, *, radius: float = 1.0,
                     center=(0.0, 0.0)) -> ProfileFunction:
    """(R²−|y−c|²)_+^power · factor(y). power = a 이면 a-급, a−1 이면 큰 급."""
    a = as_order(a)
    tag = Smoothness.LARGE_CLASS if power < a - 1e-12 else Smoothness.INTERIOR_SMOOTH_ZERO_EXTERIOR

    def ev(p):
        base = _gap(p, center, radius) ** power
        return base if factor is None else base * factor(p)

    return ProfileFunction(ev, tag, support_radius=radius, exponent=power, center=center)


def large_harmonic_profile(a, radius: float = 1.0, center=(0.0, 0.0)) -> ProfileFunction:
    """u_{1−a} = (1−|x|²)^{a−1} (공 안), 0 (밖). (−Δ)^a u_{1−a} = 0 in B."""
    a = as_order(a)
    return weighted_profile(a, a - 1.0, radius=radius, center=center)


def torsion_profile(a, radius: float = 1.0, center=(0.0, 0.0)) -> ProfileFunction:
    a = as_order(a)
    return weighted_profile(a, a, radius=radius, center=center)


# =============================================================================
# 주치값 오라클
# =============================================================================

def _directions(n: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    m = 8 * 2 ** level
    ang = 2.0 * math.pi * np.arange(m) / m
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1), np.full(m, 2.0 * math.pi / m)


def _near_radius(u: ProfileFunction, x: np.ndarray) -> float:
    if not u.compact:
        return NEAR_RADIUS
    clearance = u.support_radius - float(np.linalg.norm(x - np.asarray(u.center)))
    if clearance <= CLEARANCE_FLOOR * u.support_radius:
        raise QuadratureRefusal(
            f"x={x.tolist()} 가 비매끄러운 면에서 {clearance:.3g} 거리 - 오차 추정 불가")
    return min(NEAR_RADIUS, 0.5 * clearance)


def _far_field(u, x, thetas, rho, a, n_far):
    """∫_ρ^∞ u(x+tθ) t^{−1−2a} dt, 방향별."""
    if u.compact:
        p = x - np.asarray(u.center)
        ptheta = thetas @ p
        t1 = -ptheta + np.sqrt(np.maximum(ptheta ** 2 - p @ p + u.support_radius ** 2, 0.0))
        beta = u.exponent
        xj, wj = roots_jacobi(n_far, beta, 0.0)
        span = (t1 - rho)[:, None]
        t = rho + span * 0.5 * (1.0 + xj)
        gap = span * 0.5 * (1.0 - xj)
        vals = u(x + t[..., None] * thetas[:, None, :])
        phi = vals * t ** (-1.0 - 2.0 * a) / gap ** beta
        return (0.5 * span[:, 0]) ** (beta + 1.0) * (phi @ wj)
    # 전역: t = ρ e^τ, τ ∈ [0, log(T/ρ)] 를 4 패널 Gauss-Legendre
    xg, wg = roots_legendre(max(2, n_far // 2))
    edges = np.linspace(0.0, math.log(TRUNCATION_RADIUS / rho), 5)
    total = np.zeros(len(thetas))
    for lo, hi in zip(edges[:-1], edges[1:]):
        tau = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        t = rho * np.exp(tau)
        vals = u(x + t[None, :, None] * thetas[:, None, :])
        total += 0.5 * (hi - lo) * (vals * t ** (-2.0 * a)) @ wg
    tail = u(x + TRUNCATION_RADIUS * thetas) * TRUNCATION_RADIUS ** (-2.0 * a) / (2.0 * a)
    return total + tail


def _pv_at_level(u: ProfileFunction, x: np.ndarray, a: float, n: int, level: int):
    c = kernel_constants(a, n).frac_constant
    rho = _near_radius(u, x)
    thetas, omegas = _directions(n, level)
    n_near, n_far = 4 * (level + 1), 8 * (level + 1)

    xj, wj = roots_jacobi(n_near, 0.0, 1.0 - 2.0 * a)
    t = 0.5 * rho * (1.0 + xj)
    wt = wj * (0.5 * rho) ** (2.0 - 2.0 * a)
    u0 = float(u(x[None, :])[0])
    shift = t[None, :, None] * thetas[:, None, :]
    second = (u(x + shift) + u(x - shift) - 2.0 * u0) / (2.0 * t * t)
    near = -(second @ wt)

    plateau = u0 * rho ** (-2.0 * a) / (2.0 * a)
    far = _far_field(u, x, thetas, rho, a, n_far)
    value = c * float(omegas @ (near + plateau - far))
    magnitude = c * float(omegas @ (np.abs(near) + abs(plateau) + np.abs(far)))
    return value, magnitude


def pv_fractional_laplacian(u: ProfileFunction, x, a, n: int = 2, quad_level: int = 3) -> OracleValue:
    a = as_order(a)
    if n not in (1, 2):
        raise InvalidParameterError(f"n={n}: 오라클은 n ∈ {{1, 2}}")
    if quad_level < 0:
        raise InvalidParameterError("quad_level ≥ 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,) or u.dim != n:
        raise InvalidParameterError(f"점 차원 {x.shape} / 프로파일 차원 {u.dim} ≠ n={n}")
    value, magnitude = _pv_at_level(u, x, a, n, quad_level)
    coarse, _ = _pv_at_level(u, x, a, n, max(quad_level - 1, 0))
    error = abs(value - coarse) if quad_level > 0 else abs(value - _pv_at_level(u, x, a, n, 1)[0])
    return OracleValue(value=value, error=error, magnitude=magnitude, level=quad_level)


def exterior_fractional_laplacian(f, x, a, patch):
    """supp f ⊂ W, x ∉ W̄ : (−Δ)^a f(x) = −C ∫_W f(y)/|x−y|^{n+2a} dy (주치값 불필요)."""
    a = as_order(a)
    n = patch.geometry.n
    c = kernel_constants(a, n).frac_constant
    values = np.asarray(getattr(f, "values", f), dtype=float)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        d = np.linalg.norm(patch.nodes - p, axis=-1)
        if np.any(d == 0):
            raise InvalidParameterError("exterior_fractional_laplacian: x 가 W 의 노드와 일치")
        out[i] = -c * np.sum(values * patch.weights * d ** (-(n + 2.0 * a)))
    return float(out[0]) if np.ndim(x) == 1 else out


def fourier_fractional_laplacian(radial_profile: Callable[[float], float], radius: float, a, *,
                                 radial_cutoff: float = 12.0,
                                 frequency_cutoff: float = 40.0) -> float:
    """2차원 반경 함수의 푸리에 승수 경로: ∫₀^∞ k^{2a+1} H(k) J₀(k|x|) dk,
    H(k) = ∫₀^∞ u(r) J₀(kr) r dr (한켈 변환)."""
    a = as_order(a)

    def hankel(k):
        return quad(lambda r: radial_profile(r) * j0(k * r) * r, 0.0, radial_cutoff,
                    limit=200, epsabs=1e-13)[0]

    val, _ = quad(lambda k: k ** (2.0 * a + 1.0) * hankel(k) * j0(k * radius),
                  0.0, frequency_cutoff, limit=200, epsabs=1e-11)
    return float(val)


# =============================================================================
# 경계 비율 극한
# =============================================================================

def boundary_ratio_limit(u: ProfileFunction, omega, exponent: float, *,
                         levels=RATIO_LEVELS) -> float:
    """반경 방향 극한 u(c + (1−ε)(ω−c)) / (εR)^exponent 의 Richardson 외삽."""
    omega = np.asarray(omega, dtype=float)
    center = np.asarray(u.center)
    radius = float(np.linalg.norm(omega - center))
    if u.compact and abs(radius - u.support_radius) > 1e-9 * u.support_radius:
        raise InvalidParameterError("ω 는 지지 원 위에 있어야 한다")
    levels = tuple(sorted((float(e) for e in levels), reverse=True))
    if len(levels) < 2:
        raise InvalidParameterError("외삽에는 ε 두 단계 이상 필요")
    pts = np.array([center + (1.0 - e) * (omega - center) for e in levels])
    v = u(pts) / (np.asarray(levels) * radius) ** exponent

    last = abs(v[-1] - v[-2])
    scale = max(abs(v[-1]), abs(v[-2]))
    spread = last / scale if scale > 0 else 0.0
    contracting = len(v) < 3 or last <= 0.5 * abs(v[-2] - v[-3]) + 1e-14 * max(scale, 1.0)
    if spread > RATIO_SPREAD and not contracting:
        raise WrongExponentError(
            f"exponent={exponent}: 비율 {v.tolist()} 가 수렴하지 않음 (spread {spread:.2%})")
    q = levels[-2] / levels[-1]
    return float(v[-1] + (v[-1] - v[-2]) / (q - 1.0))
