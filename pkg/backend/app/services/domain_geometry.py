"""
영역 기하 · 구적 격자
=====================
단위 원판 Ω = B(θ; r), 외부 소스 영역 W (환형), 측정 호 Σ ⊆ ∂Ω 와
모든 모듈이 공유하는 구적 격자를 만든다.

내부 격자는 극좌표 텐서 격자다.
  · 반경: ρ = r(1 − s²), s 는 [0,1] 위 가중 s^{2a'−1} 의 Gauss-Jacobi 노드.
    해가 경계에서 d^a, d^{a−1} 처럼 거동하므로 균등 격자로는 수렴이 멈춘다.
    치환 후 a-급·큰(a−1)-급 피적분함수는 s 에 대해 매끄러워져 스펙트럴 수렴한다.
  · 각도: 균등 2πl/M. 경계 노드도 같은 각도를 쓴다 (FFT 기반 트레이스 연산의 전제).

격자 객체는 생성 후 불변이다.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from ..core.errors import InvalidParameterError

logger = logging.getLogger(__name__)

MIN_RADIAL = 4
MIN_ANGULAR = 8
HALF_CIRCLE = (0.0, math.pi)
FULL_CIRCLE = (0.0, 2.0 * math.pi)
DEFAULT_EXTERIOR = (1.5, 2.0)
DEFAULT_EXTERIOR_COUNTS = (8, 64)


# =============================================================================
# 기본 타입
# =============================================================================

@dataclass(frozen=True)
class FractionalOrder:
    """분수 라플라시안 차수 a (0 < a < 1)"""
    a: float

    def __post_init__(self):
        a = float(self.a)
        if not math.isfinite(a) or not (0.0 < a < 1.0):
            raise InvalidParameterError(f"a={self.a}: 분수 차수는 0 < a < 1 이어야 한다")
        object.__setattr__(self, "a", a)


def as_order(a) -> float:
    if isinstance(a, FractionalOrder):
        return a.a
    return FractionalOrder(a).a


@dataclass(frozen=True)
class DiskGeometry:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    n: int = 2

    def __post_init__(self):
        r = float(self.radius)
        if not math.isfinite(r) or r <= 0:
            raise InvalidParameterError(f"radius={self.radius}: 반지름은 양수여야 한다")
        if self.n != 2:
            raise InvalidParameterError(f"n={self.n}: 원판 솔버는 n = 2 만 지원")
        c = tuple(float(v) for v in self.center)
        if len(c) != 2:
            raise InvalidParameterError("center 는 평면의 점이어야 한다")
        object.__setattr__(self, "radius", r)
        object.__setattr__(self, "center", c)

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def relative(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) - self.theta

    def gap(self, points) -> np.ndarray:
        """r² − |x−θ|² (트레이스 가중의 밑)"""
        rel = self.relative(points)
        return self.radius ** 2 - np.sum(rel * rel, axis=-1)

    def polar(self, points) -> tuple[np.ndarray, np.ndarray]:
        rel = self.relative(points)
        return np.hypot(rel[..., 0], rel[..., 1]), np.arctan2(rel[..., 1], rel[..., 0])

    def point(self, rho, phi) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        phi = np.asarray(phi, dtype=float)
        return self.theta + np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)

    @property
    def spec(self) -> dict:
        return {"center": list(self.center), "radius": self.radius, "n": self.n}


# =============================================================================
# 격자
# =============================================================================

@dataclass(frozen=True, eq=False)
class InteriorGrid:
    """Ω 내부 극좌표 텐서 격자. 노드 순서는 링 우선 (index = i·M + l)."""
    geometry: DiskGeometry
    order: float
    s: np.ndarray                # (nr,) 군집 변수
    rho: np.ndarray              # (nr,) 링 반경, 경계 쪽이 먼저
    radial_weights: np.ndarray   # (nr,) ∫ F ρ dρ 용 가중
    phi: np.ndarray              # (M,)
    nodes: np.ndarray            # (N, 2)
    weights: np.ndarray          # (N,) 면적 가중
    dist: np.ndarray             # (N,) d(x) = r − |x−θ|
    gap: np.ndarray              # (N,) r² − |x−θ|² (상쇄 없이 r² s²(2−s²) 로 계산)
    weight_a: np.ndarray         # (N,) gap^a

    @property
    def radial_count(self) -> int:
        return len(self.rho)

    @property
    def angular_count(self) -> int:
        return len(self.phi)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def node_rho(self) -> np.ndarray:
        return np.repeat(self.rho, self.angular_count)

    @property
    def node_phi(self) -> np.ndarray:
        return np.tile(self.phi, self.radial_count)

    def rings(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.radial_count, self.angular_count)

    def integrate(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def gap_power(self, p: float) -> np.ndarray:
        return self.gap ** p


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    geometry: DiskGeometry
    angles: np.ndarray
    nodes: np.ndarray
    arc_weights: np.ndarray
    sigma: tuple
    sigma_mask: np.ndarray

    @property
    def size(self) -> int:
        return len(self.angles)

    @property
    def sigma_count(self) -> int:
        return int(self.sigma_mask.sum())

    def masked(self, values) -> np.ndarray:
        return np.where(self.sigma_mask, np.asarray(values, dtype=float), 0.0)

    def integrate(self, values, *, on_sigma: bool = False) -> float:
        w = self.arc_weights * self.sigma_mask if on_sigma else self.arc_weights
        return float(w @ np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class ExteriorPatch:
    geometry: DiskGeometry
    inner_radius: float
    outer_radius: float
    radii: np.ndarray
    angles: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    separation: float

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def area(self) -> float:
        return math.pi * (self.outer_radius ** 2 - self.inner_radius ** 2)

    @property
    def spec(self) -> dict:
        return {"inner": self.inner_radius, "outer": self.outer_radius,
                "counts": [len(self.radii), len(self.angles)]}


def sigma_mask(angles, sigma) -> np.ndarray:
    """각 구간 [φ₀, φ₁) 멤버십. 길이 ≥ 2π 이면 전체 원."""
    phi0, phi1 = (float(v) for v in sigma)
    span = phi1 - phi0
    if not span > 0:
        raise InvalidParameterError(f"sigma={sigma}: φ₁ > φ₀ 이어야 한다")
    angles = np.asarray(angles, dtype=float)
    if span >= 2.0 * math.pi - 1e-12:
        return np.ones(angles.shape, dtype=bool)
    return np.mod(angles - phi0, 2.0 * math.pi) < span


def build_disk_grids(geometry: DiskGeometry, radial_count: int, angular_count: int, *,
                     order: float = 0.5, sigma=HALF_CIRCLE) -> tuple[InteriorGrid, BoundaryGrid]:
    """(InteriorGrid, BoundaryGrid). order 는 군집 지수 a' (보통 문제의 a)."""
    if radial_count < MIN_RADIAL:
        raise InvalidParameterError(f"radial_count={radial_count} < {MIN_RADIAL}")
    if angular_count < MIN_ANGULAR:
        raise InvalidParameterError(f"angular_count={angular_count} < {MIN_ANGULAR}")
    order = as_order(order)
    r = geometry.radius
    beta = 2.0 * order - 1.0
    x, w = roots_jacobi(radial_count, 0.0, beta)
    idx = np.argsort(x)
    x, w = x[idx], w[idx]
    s = 0.5 * (1.0 + x)
    lam = w / 2.0 ** (beta + 1.0)
    rho = r * (1.0 - s * s)
    radial_weights = lam * 2.0 * r * r * (1.0 - s * s) * s ** (2.0 - 2.0 * order)
    ring_gap = r * r * s * s * (2.0 - s * s)

    phi = 2.0 * math.pi * np.arange(angular_count) / angular_count
    dphi = 2.0 * math.pi / angular_count
    node_rho = np.repeat(rho, angular_count)
    node_phi = np.tile(phi, radial_count)
    nodes = geometry.point(node_rho, node_phi)
    gap = np.repeat(ring_gap, angular_count)
    interior = InteriorGrid(
        geometry=geometry, order=order, s=s, rho=rho, radial_weights=radial_weights, phi=phi,
        nodes=nodes, weights=np.repeat(radial_weights, angular_count) * dphi,
        dist=r - node_rho, gap=gap, weight_a=gap ** order,
    )

    mask = sigma_mask(phi, sigma)
    if not mask.any():
        raise InvalidParameterError(f"sigma={sigma}: 측정 호 Σ 에 경계 노드가 없다")
    boundary = BoundaryGrid(
        geometry=geometry, angles=phi.copy(), nodes=geometry.point(np.full(angular_count, r), phi),
        arc_weights=np.full(angular_count, r * dphi), sigma=tuple(float(v) for v in sigma),
        sigma_mask=mask,
    )
    logger.debug("[grid] interior %dx%d (order=%.3g), Σ %d/%d",
                 radial_count, angular_count, order, int(mask.sum()), angular_count)
    return interior, boundary


def build_exterior_patch(geometry: DiskGeometry, inner_radius: float, outer_radius: float,
                         counts=DEFAULT_EXTERIOR_COUNTS) -> ExteriorPatch:
    r = geometry.radius
    inner, outer = float(inner_radius), float(outer_radius)
    if not inner > r:
        raise InvalidParameterError(
            f"inner_radius={inner} ≤ r={r}: W̄ ∩ Ω̄ = ∅ 위반 (분리 거리 0)")
    if not outer > inner:
        raise InvalidParameterError(f"outer_radius={outer} ≤ inner_radius={inner}")
    n_rad, n_ang = (int(c) for c in counts)
    if n_rad < 1 or n_ang < MIN_ANGULAR:
        raise InvalidParameterError(f"counts={counts}: 반경 ≥ 1, 각도 ≥ {MIN_ANGULAR}")
    x, w = roots_legendre(n_rad)
    half, mid = 0.5 * (outer - inner), 0.5 * (outer + inner)
    radii = mid + half * x
    angles = 2.0 * math.pi * np.arange(n_ang) / n_ang
    ring_w = half * w * radii * (2.0 * math.pi / n_ang)
    return ExteriorPatch(
        geometry=geometry, inner_radius=inner, outer_radius=outer, radii=radii, angles=angles,
        nodes=geometry.point(np.repeat(radii, n_ang), np.tile(angles, n_rad)),
        weights=np.repeat(ring_w, n_ang), separation=inner - r,
    )


# =============================================================================
# 묶음
# =============================================================================

@dataclass(frozen=True, eq=False)
class DiskGrids:
    """내부·경계·외부 격자 묶음. 서비스 연산의 grids 인자."""
    interior: InteriorGrid
    boundary: BoundaryGrid
    patch: ExteriorPatch
    _spec: dict = field(default_factory=dict, repr=False)

    @property
    def geometry(self) -> DiskGeometry:
        return self.interior.geometry

    @property
    def order(self) -> float:
        return self.interior.order

    @property
    def spec(self) -> dict:
        return dict(self._spec)

    def with_sigma(self, sigma) -> "DiskGrids":
        return build_lab_grids(self.order, self.interior.radial_count, self.interior.angular_count,
                               geometry=self.geometry, sigma=sigma,
                               exterior=(self.patch.inner_radius, self.patch.outer_radius),
                               exterior_counts=(len(self.patch.radii), len(self.patch.angles)))

    def with_order(self, a) -> "DiskGrids":
        return build_lab_grids(a, self.interior.radial_count, self.interior.angular_count,
                               geometry=self.geometry, sigma=self.boundary.sigma,
                               exterior=(self.patch.inner_radius, self.patch.outer_radius),
                               exterior_counts=(len(self.patch.radii), len(self.patch.angles)))

    def refined(self, factor: float = 1.5) -> "DiskGrids":
        nr = int(round(self.interior.radial_count * factor))
        m = 2 * int(round(self.interior.angular_count * factor / 2.0))
        return build_lab_grids(self.order, nr, m, geometry=self.geometry, sigma=self.boundary.sigma,
                               exterior=(self.patch.inner_radius, self.patch.outer_radius),
                               exterior_counts=(len(self.patch.radii), len(self.patch.angles)))


def build_lab_grids(a=0.5, radial_count: int = 16, angular_count: int = 32, *,
                    geometry: DiskGeometry | None = None, sigma=HALF_CIRCLE,
                    exterior=None, exterior_counts=DEFAULT_EXTERIOR_COUNTS) -> DiskGrids:
    geometry = geometry or DiskGeometry()
    order = as_order(a)
    if exterior is None:
        exterior = (DEFAULT_EXTERIOR[0] * geometry.radius, DEFAULT_EXTERIOR[1] * geometry.radius)
    interior, boundary = build_disk_grids(geometry, radial_count, angular_count,
                                          order=order, sigma=sigma)
    patch = build_exterior_patch(geometry, exterior[0], exterior[1], exterior_counts)
    spec = {
        "geometry": geometry.spec,
        "order": order,
        "radial_count": int(radial_count),
        "angular_count": int(angular_count),
        "sigma": [float(v) for v in sigma],
        "exterior": patch.spec,
    }
    return DiskGrids(interior=interior, boundary=boundary, patch=patch, _spec=spec)


def grid_rows(grid) -> list[list[float]]:
    """CSV 덤프용 행 (x1, x2, weight, dist). 외부 패치의 dist 는 |x−θ| − r."""
    if isinstance(grid, InteriorGrid):
        w, d = grid.weights, grid.dist
    elif isinstance(grid, BoundaryGrid):
        w, d = grid.arc_weights, np.zeros(grid.size)
    elif isinstance(grid, ExteriorPatch):
        w = grid.weights
        d = np.hypot(*grid.geometry.relative(grid.nodes).T) - grid.geometry.radius
    else:
        raise InvalidParameterError(f"알 수 없는 격자 타입: {type(grid).__name__}")
    return [[x[0], x[1], wi, di] for x, wi, di in zip(grid.nodes, w, d)]


GRID_HEADER = ["x1", "x2", "weight", "dist"]
