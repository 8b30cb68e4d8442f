"""
순방향 솔버 (Nyström)
=====================
두 경계값 문제를 그린 커널 기반 제2종 적분방정식으로 푼다.

  외부자료 문제   ((−Δ)^a + q) u = 0 in Ω,  u = f in Ω_e
      w = u − f 는 w = G[h_src − q w] 를 만족 → (I + S Q) w = S h_src
  큰 디리클레 문제 ((−Δ)^a + q) u = 0 in Ω,  u/d^{a−1} = g on ∂Ω
      u = P_a g − G[q u]                  → (I + S Q) u = P_a g

S 는 green_scale · green_disk 의 Nyström 행렬에 특이점 차감을 적용한 것이다:
    S_ij = s·G(x_i,x_j)·w_j (i ≠ j),   S_ii = torsion(x_i) − s·Σ_{j≠i} G(x_i,x_j)·w_j
상수 밀도에서 정확하고, W·S 는 대칭이다 (상반성).

트레이스 u/d^a 는 경계 극한 커널 (green_trace_kernel) 을 밀도에 적분해 정확히 얻는다 (비율 외삽 아님).
각도 방향 푸아송 인자는 링마다 FFT 배율 (ρ_i/r)^{|k|} 로 정확 적분한다.
"""
import hashlib
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon
from scipy.special import gamma

from ..core.config import CONDITION_LIMIT, RESIDUAL_LIMIT
from ..core.errors import ConditioningError, InvalidParameterError
from ..core.ttl_cache import cached
from .domain_geometry import BoundaryGrid, DiskGrids, ExteriorPatch, InteriorGrid, as_order
from .frac_oracle import ProfileFunction, Smoothness, pv_fractional_laplacian
from .kernels import (dirichlet_to_neumann, exterior_source_field, green_disk,
                      green_trace_kernel, kernel_constants, mode_numbers, poisson_large,
                      poisson_ring_circulants, torsion)

logger = logging.getLogger(__name__)

SUPPORT_FRACTION = 0.9
PROBE_RADIUS = 0.8


# =============================================================================
# 자료 타입
# =============================================================================

def _bump(points, height: float, width: float, center) -> np.ndarray:
    """C_c^∞ 범프 height·exp(1 − 1/(1 − |x−c|²/w²))"""
    rel = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    t = np.sum(rel * rel, axis=-1) / width ** 2
    out = np.zeros(t.shape)
    inside = t < 1.0
    out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - t[inside]))
    return out


@dataclass(frozen=True, eq=False)
class Potential:
    """내부 격자 위 q. |x−θ| > support_radius 인 노드에서 정확히 0."""
    values: np.ndarray
    support_radius: float
    profile: Optional[Callable] = None
    label: str = "custom"

    @classmethod
    def on_grid(cls, interior: InteriorGrid, values, support_radius: float, *,
                profile=None, label: str = "custom") -> "Potential":
        values = np.asarray(values, dtype=float)
        r = interior.geometry.radius
        if values.shape != (interior.size,):
            raise InvalidParameterError(f"q 길이 {values.shape} ≠ 노드 수 {interior.size}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("q 에 유한하지 않은 값")
        if not 0 < support_radius <= SUPPORT_FRACTION * r + 1e-12:
            raise InvalidParameterError(
                f"support_radius={support_radius} > {SUPPORT_FRACTION}·r (q 는 Ω 안에 콤팩트 지지)")
        outside = interior.node_rho > support_radius
        if np.any(values[outside] != 0):
            raise InvalidParameterError("지지 반경 밖 노드에서 q ≠ 0")
        values.setflags(write=False)
        return cls(values=values, support_radius=float(support_radius), profile=profile, label=label)

    @classmethod
    def from_function(cls, interior: InteriorGrid, fn: Callable, support_radius: float, *,
                      label: str = "custom") -> "Potential":
        vals = np.asarray(fn(interior.nodes), dtype=float)
        vals = np.where(interior.node_rho > support_radius, 0.0, vals)
        return cls.on_grid(interior, vals, support_radius, profile=fn, label=label)

    @classmethod
    def zero(cls, interior: InteriorGrid, support_radius: float | None = None) -> "Potential":
        sr = support_radius or SUPPORT_FRACTION * interior.geometry.radius
        return cls.from_function(interior, lambda p: np.zeros(np.shape(p)[:-1]), sr, label="zero")

    @property
    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()[:16]

    def resample(self, interior: InteriorGrid) -> "Potential":
        if self.profile is None:
            raise InvalidParameterError(f"q({self.label}) 는 연속 프로파일이 없어 재표본 불가")
        return Potential.from_function(interior, self.profile, self.support_radius, label=self.label)

    def with_values(self, values) -> "Potential":
        return Potential(values=np.asarray(values, dtype=float), support_radius=self.support_radius,
                         profile=None, label=f"{self.label}*")


def bump_potential(interior: InteriorGrid, height: float = 5.0, width: float = 0.3,
                   center=(0.3, 0.0), support_radius: float | None = None) -> Potential:
    return multi_bump_potential(interior, [center], height, width, support_radius)


def multi_bump_potential(interior: InteriorGrid, centers, height: float = 5.0, width: float = 0.3,
                         support_radius: float | None = None) -> Potential:
    geometry = interior.geometry
    centers = [tuple(float(v) for v in c) for c in centers]
    reach = max(float(np.linalg.norm(geometry.relative(c))) + width for c in centers)
    sr = support_radius if support_radius is not None else min(reach, SUPPORT_FRACTION * geometry.radius)
    if reach > sr + 1e-12:
        raise InvalidParameterError(f"범프 도달 반경 {reach:.3g} > 지지 반경 {sr:.3g}")

    def fn(p):
        return sum(_bump(p, height, width, c) for c in centers)

    label = "bump" if len(centers) == 1 else "two-bumps"
    return Potential.from_function(interior, fn, sr, label=label)


@dataclass(frozen=True, eq=False)
class SourceFunction:
    """외부 패치 노드 위 f (W 밖 0 확장은 암묵)."""
    values: np.ndarray
    label: str = "source"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("f 에 유한하지 않은 값")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, patch: ExteriorPatch, fn: Callable, label: str = "source"):
        return cls(np.asarray(fn(patch.nodes), dtype=float), label)

    def __add__(self, other: "SourceFunction") -> "SourceFunction":
        return SourceFunction(self.values + other.values, f"{self.label}+{other.label}")

    def __mul__(self, c: float) -> "SourceFunction":
        return SourceFunction(c * self.values, self.label)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class BoundaryDatum:
    """경계 노드 위 g. Σ 밖 노드에서 0."""
    values: np.ndarray
    profile: Optional[Callable] = None

    @classmethod
    def on_grid(cls, boundary: BoundaryGrid, values, profile=None) -> "BoundaryDatum":
        v = np.asarray(values, dtype=float)
        if v.shape != (boundary.size,):
            raise InvalidParameterError(f"g 길이 {v.shape} ≠ 경계 노드 수 {boundary.size}")
        if np.any(v[~boundary.sigma_mask] != 0):
            raise InvalidParameterError("Σ 밖 경계 노드에서 g ≠ 0")
        return cls(values=v, profile=profile)

    @classmethod
    def from_function(cls, boundary: BoundaryGrid, fn: Callable) -> "BoundaryDatum":
        """fn: 각도 → 값. Σ 로 잘라 둔다."""
        return cls.on_grid(boundary, boundary.masked(fn(boundary.angles)), profile=fn)

    def resample(self, boundary: BoundaryGrid) -> "BoundaryDatum":
        if self.profile is None:
            raise InvalidParameterError("g 는 각도 함수가 없어 재표본 불가")
        return BoundaryDatum.from_function(boundary, self.profile)


def fourier_datum(boundary: BoundaryGrid, mode: int, kind: str = "cos") -> BoundaryDatum:
    if mode == 0:
        return BoundaryDatum.from_function(boundary, lambda t: np.ones_like(t))
    trig = np.cos if kind == "cos" else np.sin
    return BoundaryDatum.from_function(boundary, lambda t: trig(mode * t))


class SolutionClass(str, Enum):
    A_CLASS = "a-class"
    LARGE = "large-class"


@dataclass(frozen=True, eq=False)
class FieldSolution:
    interior_values: np.ndarray     # u (외부자료 문제는 Ω 에서 u = w)
    trace_a: np.ndarray             # u/d^a (정칙부), (2r)^a 변환 적용
    trace_am1: np.ndarray           # u/d^{a−1}, a-급은 0
    class_tag: SolutionClass
    a: float
    density: np.ndarray             # 그린 밀도 ρ: 정칙부 = G_true[ρ]
    regular_values: np.ndarray      # 정칙부 (a-급) 노드값
    source_field: Optional[np.ndarray] = None   # h_src (외부자료 문제)
    datum: Optional[np.ndarray] = None          # g (큰 해)
    residual: float = 0.0
    condition: float = 1.0


# =============================================================================
# 연산자 조립
# =============================================================================

@dataclass(frozen=True, eq=False)
class GreenOperator:
    a: float
    scale: float
    matrix: np.ndarray          # S (N×N)
    trace_matrix: np.ndarray    # 밀도 → u/d^a (M×N)
    circulants: np.ndarray      # (nr, M, M) 링별 푸아송 배율
    trace_factor: float


def _interior_key(interior: InteriorGrid, a: float) -> dict:
    return {"geometry": interior.geometry.spec, "order": interior.order, "a": a,
            "counts": [interior.radial_count, interior.angular_count]}


def _assemble(interior: InteriorGrid, a: float) -> GreenOperator:
    geometry = interior.geometry
    k = kernel_constants(a, geometry.n)
    x, wt = interior.nodes, interior.weights
    n = interior.size
    iu, ju = np.triu_indices(n, 1)
    g = np.zeros((n, n))
    vals = green_disk(x[iu], x[ju], a, geometry)
    g[iu, ju] = vals
    g[ju, iu] = vals
    kmat = k.green_scale * g * wt[None, :]
    s = kmat.copy()
    s[np.diag_indices(n)] = torsion(x, a, geometry) - kmat.sum(axis=1)

    r = geometry.radius
    circ = poisson_ring_circulants(interior)
    factor = (2.0 * r) ** a * k.green_scale * k.kappa_n * r ** (-2.0 * a)
    ring_w = interior.radial_weights * interior.rings(interior.gap)[:, 0] ** (a - 1.0)
    trace = np.concatenate([factor * 2.0 * math.pi * wi * c for wi, c in zip(ring_w, circ)], axis=1)
    logger.info("[nystrom] 그린 행렬 조립 N=%d a=%.3g", n, a)
    return GreenOperator(a=a, scale=k.green_scale, matrix=s, trace_matrix=trace,
                         circulants=circ, trace_factor=factor)


def green_operator(grids: DiskGrids, a=None) -> GreenOperator:
    a = grids.order if a is None else as_order(a)
    interior = grids.interior
    return cached(("green", _interior_key(interior, a)), lambda: _assemble(interior, a))


@dataclass(frozen=True, eq=False)
class ForwardOperator:
    """(I + S Q) 의 LU 분해. 분해 후 불변 - 서로 다른 우변의 동시 풀이에 안전."""
    green: GreenOperator
    q: np.ndarray
    system: np.ndarray
    lu: tuple
    condition: float

    def solve(self, rhs, *, transpose: bool = False) -> tuple[np.ndarray, float]:
        b = np.asarray(rhs, dtype=float)
        a_mat = self.system.T if transpose else self.system
        trans = 1 if transpose else 0
        x = lu_solve(self.lu, b, trans=trans)
        res = _relative_residual(a_mat, x, b)
        if res > RESIDUAL_LIMIT:
            x = x + lu_solve(self.lu, b - a_mat @ x, trans=trans)
            res = _relative_residual(a_mat, x, b)
        if res > RESIDUAL_LIMIT:
            raise ConditioningError(f"선형계 잔차 {res:.3g} > {RESIDUAL_LIMIT:g}",
                                    condition=self.condition, residual=res)
        return x, res


def _relative_residual(a_mat, x, b) -> float:
    r = a_mat @ x - b
    if b.ndim == 1:
        nb = np.linalg.norm(b)
        return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))
    nb = np.linalg.norm(b, axis=0)
    nr = np.linalg.norm(r, axis=0)
    return float(np.max(np.where(nb > 0, nr / np.where(nb > 0, nb, 1.0), nr)))


def factorize(grids: DiskGrids, q: Potential, a=None) -> ForwardOperator:
    green = green_operator(grids, a)
    qv = np.asarray(q.values, dtype=float)
    system = np.eye(len(qv)) + green.matrix * qv[None, :]
    lu = lu_factor(system)
    rcond, info = dgecon(lu[0], np.linalg.norm(system, 1), norm="1")
    condition = math.inf if rcond <= 0 else 1.0 / rcond
    if info != 0 or condition > CONDITION_LIMIT:
        raise ConditioningError(
            f"(I + G M_q) 조건수 {condition:.3g} > {CONDITION_LIMIT:g}: "
            "고유값 조건 (w = 0 만 해) 위반 의심", condition=condition)
    return ForwardOperator(green=green, q=qv, system=system, lu=lu, condition=condition)


# =============================================================================
# 풀이
# =============================================================================

def trace_extraction(density, grids: DiskGrids, a=None, *, method: str = "spectral") -> np.ndarray:
    """밀도 ρ (= h_src − q w 등) 의 정칙 트레이스 (G_true[ρ])/d^a on ∂Ω."""
    a = grids.order if a is None else as_order(a)
    density = np.asarray(density, dtype=float)
    green = green_operator(grids, a)
    if method == "spectral":
        return green.trace_matrix @ density
    if method == "direct":
        r = grids.geometry.radius
        ker = green_trace_kernel(grids.interior.nodes[None, :, :], grids.boundary.nodes[:, None, :],
                                 a, grids.geometry)
        return (2.0 * r) ** a * green.scale * (ker * grids.interior.weights[None, :]) @ density
    raise InvalidParameterError(f"method={method}: spectral | direct")


def large_extension(g, grids: DiskGrids, a=None) -> np.ndarray:
    """격자 노드 위 P_a g (링별 순환행렬 = 삼각 보간의 정확한 조화확장)."""
    a = grids.order if a is None else as_order(a)
    green = green_operator(grids, a)
    gv = np.asarray(getattr(g, "values", g), dtype=float)
    interior = grids.interior
    ring_gap = interior.rings(interior.gap)[:, 0]
    ext = np.einsum("iml,l->im", green.circulants, gv)
    return (ring_gap[:, None] ** (a - 1.0) * ext).reshape(-1)


def exterior_solutions(q: Potential, sources: list[SourceFunction], grids: DiskGrids, a=None,
                       op: ForwardOperator | None = None):
    """여러 f 를 한 번의 분해로 푼다. (W, H, traces, op, residual) 반환 - 열 = 소스."""
    a = grids.order if a is None else as_order(a)
    op = op or factorize(grids, q, a)
    h = np.column_stack([exterior_source_field(f, grids.interior.nodes, a, grids.patch)
                         for f in sources])
    w, res = op.solve(op.green.matrix @ h)
    dens = h - op.q[:, None] * w
    return w, h, op.green.trace_matrix @ dens, op, res


def solve_exterior_dirichlet(q: Potential, f: SourceFunction, grids: DiskGrids, a=None) -> FieldSolution:
    a = grids.order if a is None else as_order(a)
    w, h, tr, op, res = exterior_solutions(q, [f], grids, a)
    w, h, tr = w[:, 0], h[:, 0], tr[:, 0]
    logger.debug("[nystrom] exterior solve residual=%.2e cond=%.2e", res, op.condition)
    return FieldSolution(
        interior_values=w, trace_a=tr, trace_am1=np.zeros_like(tr), class_tag=SolutionClass.A_CLASS,
        a=a, density=h - op.q * w, regular_values=w, source_field=h, residual=res,
        condition=op.condition,
    )


def solve_large_dirichlet(q: Potential, g: BoundaryDatum, grids: DiskGrids, a=None) -> FieldSolution:
    a = grids.order if a is None else as_order(a)
    op = factorize(grids, q, a)
    gv = np.asarray(g.values, dtype=float)
    pg = large_extension(gv, grids, a)
    u, res = op.solve(pg)
    density = -op.q * u
    r = grids.geometry.radius
    return FieldSolution(
        interior_values=u, trace_a=op.green.trace_matrix @ density,
        trace_am1=(2.0 * r) ** (a - 1.0) * gv, class_tag=SolutionClass.LARGE, a=a,
        density=density, regular_values=op.green.matrix @ density, datum=gv, residual=res,
        condition=op.condition,
    )


def neumann_trace_large(u: FieldSolution, g: BoundaryDatum | None, grids: DiskGrids) -> np.ndarray:
    """γ_{a−1,1}u = Γ(a+1)·(u′/d^a)|_∂Ω,  u′ = u − (1/Γ(a)) d^{a−1} u₀.

    g = None 이면 큰 해는 u.datum 을 쓰고 a-급 해는 0 으로 본다.

    u = (r²−ρ²)^{a−1}H + 정칙부, H 는 g 의 조화확장. d = r − ρ 로 전개하면
    d^a 계수 = (2r)^{a−1}((1−a)g/(2r) − ∂_ρH) + trace_a(정칙부).
    """
    a = u.a
    r = grids.geometry.radius
    if g is not None:
        gv = np.asarray(g.values, dtype=float)
    elif u.datum is not None:
        gv = np.asarray(u.datum, dtype=float)
    elif u.class_tag is SolutionClass.A_CLASS:
        gv = np.zeros(grids.boundary.size)
    else:
        raise InvalidParameterError("큰 해인데 경계 자료 g 가 없다 (u.datum 도 비어 있음)")
    large = (2.0 * r) ** (a - 1.0) * ((1.0 - a) * gv / (2.0 * r) - dirichlet_to_neumann(gv, grids.boundary))
    return gamma(a + 1.0) * (large + u.trace_a)


# =============================================================================
# 격자 밖 평가 · 오라클 인증
# =============================================================================

class FieldInterpolant:
    """정칙부는 매끄러운 인자 (정칙부)/(r²−|x−θ|²)^a 를 각도 삼각보간 × s-다항 보간,
    큰 부분은 P_a g 를 정확히 평가."""

    def __init__(self, solution: FieldSolution, grids: DiskGrids):
        self.grids = grids
        self.a = solution.a
        interior = grids.interior
        smooth = interior.rings(solution.regular_values / interior.gap ** self.a)
        self._m = interior.angular_count
        self._coef = np.fft.fft(smooth, axis=1) / self._m
        self._k = mode_numbers(self._m)
        self._basis = BarycentricInterpolator(interior.s, np.eye(interior.radial_count))
        self._datum = solution.datum

    def __call__(self, points) -> np.ndarray:
        geometry = self.grids.geometry
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        gap = geometry.gap(flat)
        out = np.zeros(len(flat))
        inside = gap > 0
        if np.any(inside):
            p = flat[inside]
            rho, phi = geometry.polar(p)
            s = np.sqrt(np.clip(1.0 - rho / geometry.radius, 0.0, 1.0))
            ang = phi - self.grids.interior.phi[0]
            e = np.exp(1j * ang[:, None] * self._k[None, :])
            if self._m % 2 == 0:
                e[:, self._m // 2] = np.cos(0.5 * self._m * ang)
            ring_vals = (e @ self._coef.T).real
            smooth = np.sum(self._basis(s) * ring_vals, axis=1)
            vals = gap[inside] ** self.a * smooth
            if self._datum is not None:
                vals = vals + poisson_large(p, self._datum, self.a, self.grids.boundary)
            out[inside] = vals
        return out.reshape(pts.shape[:-1])


def evaluate_field(solution: FieldSolution, points, grids: DiskGrids) -> np.ndarray:
    return FieldInterpolant(solution, grids)(points)


def solution_profile(solution: FieldSolution, grids: DiskGrids) -> ProfileFunction:
    large = solution.class_tag is SolutionClass.LARGE
    return ProfileFunction(
        FieldInterpolant(solution, grids),
        Smoothness.LARGE_CLASS if large else Smoothness.INTERIOR_SMOOTH_ZERO_EXTERIOR,
        support_radius=grids.geometry.radius,
        exponent=solution.a - 1.0 if large else solution.a,
        center=grids.geometry.center,
    )


@dataclass(frozen=True)
class Certificate:
    probes: np.ndarray
    residuals: np.ndarray
    scales: np.ndarray

    @property
    def relative(self) -> np.ndarray:
        return np.abs(self.residuals) / self.scales

    @property
    def max_relative(self) -> float:
        return float(np.max(self.relative))


def probe_indices(grids: DiskGrids, count: int = 10, radius: float = PROBE_RADIUS) -> np.ndarray:
    """|x−θ| ≤ radius·r 노드 중 고르게 count 개 (결정적)."""
    interior = grids.interior
    eligible = np.flatnonzero(interior.node_rho <= radius * grids.geometry.radius)
    if len(eligible) == 0:
        raise InvalidParameterError("탐침 후보 노드가 없다")
    pick = np.linspace(0, len(eligible) - 1, min(count, len(eligible)))
    return eligible[np.unique(np.rint(pick).astype(int))]


def oracle_certificate(solution: FieldSolution, q: Potential, grids: DiskGrids, *,
                       probes=None, level: int = 3) -> Certificate:
    """탐침 노드에서 |(−Δ)^a u + q u| (p.v. 오라클). 척도는 오라클 절대 기여 합."""
    idx = probe_indices(grids) if probes is None else np.asarray(probes, dtype=int)
    profile = solution_profile(solution, grids)
    qv = np.asarray(q.values, dtype=float)
    res, scales = [], []
    for i in idx:
        x = grids.interior.nodes[i]
        pv = pv_fractional_laplacian(profile, x, solution.a, 2, level)
        u_i = solution.interior_values[i]
        h_i = 0.0 if solution.source_field is None else solution.source_field[i]
        res.append(pv.value - h_i + qv[i] * u_i)
        scales.append(max(pv.magnitude, abs(h_i), abs(qv[i] * u_i), 1e-300))
    cert = Certificate(probes=grids.interior.nodes[idx], residuals=np.array(res), scales=np.array(scales))
    logger.info("[oracle] 인증 %d 점, 최대 상대 잔차 %.2e", len(idx), cert.max_relative)
    return cert
