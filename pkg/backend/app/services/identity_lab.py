"""
항등식 실험실
=============
부분적분 공식, 유일성 증명의 핵심 항등식, 국소 특성화, 경계 UCP,
단사성 결여 반례를 수치로 점검하고 보고서로 남긴다.

  · check_ibp_identity          ∫v(−Δ)^a u − ∫u(−Δ)^a v = −Γ(a)Γ(a+1)∫_{∂Ω}(u/d^{a−1})(v/d^a)
  · check_gov_identity          ∫_Ω u(−Δ)^a f = −Γ(a)Γ(a+1)∫_Σ g·(v/d^a)
  · check_local_characterization u/(r²−|x|²)^{a−1} 의 조화성 + 역방향 p.v. 잔차
  · counterexample_constructor  조화다항식 직교 사영으로 트레이스가 사라지는 v
  · boundary_ucp_probe          (u/d^{a−1}, 노이만 값)|_Γ 의 최소 정규화 특이값
  · range_density_probe         중첩 기저의 계수 증가

내부의 (−Δ)^a 값은 모두 지배방정식으로 치환한다 ((−Δ)^a u = −qu, (−Δ)^a w = h − qw).
이산화 오차만 잔차에 남는다.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular, svdvals

from ..core.config import settings
from ..core.errors import DegenerateProjectionError, FraclabError, InvalidParameterError
from .domain_geometry import FULL_CIRCLE, DiskGrids, sigma_mask
from .forward_solver import (BoundaryDatum, Potential, SourceFunction, fourier_datum,
                             green_operator, neumann_trace_large, solve_exterior_dirichlet,
                             solve_large_dirichlet)
from .frac_oracle import (ProfileFunction, Smoothness, exterior_fractional_laplacian,
                          pv_fractional_laplacian)
from .kernels import harmonic_extension, kernel_constants, poisson_large
from .response_map import ResponseMatrix, nested_columns, response_conditioning

logger = logging.getLogger(__name__)

TINY = 1e-300
IDENTITY_TOLERANCE = 2e-2
COUNTEREXAMPLE_TOLERANCE = 1e-3
PROJECTION_FLOOR = 1e-8
MAX_ATTEMPTS = 5
FD_STEP = 1e-3
LOCAL_TOLERANCE = 1e-6
PV_TOLERANCE = 1e-2
UCP_MODES = 12


# =============================================================================
# 보고서
# =============================================================================

@dataclass
class IdentityReport:
    check: str
    lhs: float
    rhs: float
    relative_residual: float
    grid_spec: dict
    refinement_trend: list = field(default_factory=list)
    tolerance: float = IDENTITY_TOLERANCE
    details: dict = field(default_factory=dict)
    limits: dict = field(default_factory=dict)     # details 키 → 상한, passed 에 함께 들어간다

    @classmethod
    def from_sides(cls, check: str, lhs: float, rhs: float, grids: DiskGrids, *,
                   floor: float = TINY, tolerance: float = IDENTITY_TOLERANCE, limits: dict | None = None,
                   **details):
        lhs, rhs = float(lhs), float(rhs)
        rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)
        return cls(check, lhs, rhs, rel, grids.spec, [rel], tolerance, details, dict(limits or {}))

    @property
    def passed(self) -> bool:
        return (self.relative_residual <= self.tolerance
                and all(self.details[key] <= limit for key, limit in self.limits.items()))

    def summary(self) -> tuple[float, float, float]:
        return self.lhs, self.rhs, self.relative_residual

    def as_dict(self) -> dict:
        return {
            "check": self.check, "lhs": self.lhs, "rhs": self.rhs,
            "relative_residual": self.relative_residual, "tolerance": self.tolerance,
            "passed": self.passed, "grid": self.grid_spec, "limits": self.limits,
            "refinement_trend": list(self.refinement_trend), "details": self.details,
        }


def _boundary_pairing(grids: DiskGrids, tr_am1, tr_a, *, on_sigma: bool = False) -> float:
    return grids.boundary.integrate(np.asarray(tr_am1) * np.asarray(tr_a), on_sigma=on_sigma)


def _refinable(q: Potential, g: BoundaryDatum) -> bool:
    return q.profile is not None and g.profile is not None


def _with_refinement(report: IdentityReport, build, q, g, f, grids: DiskGrids, refine: bool):
    """한 단계 세분 격자에서 같은 점검을 반복해 refinement_trend = [기본, 세분]."""
    if not refine or not _refinable(q, g):
        return report
    fine = grids.refined(1.5)
    finer = build(q.resample(fine.interior), g.resample(fine.boundary), f, fine, refine=False)
    report.refinement_trend = [report.relative_residual, finer.relative_residual]
    return report


# =============================================================================
# 항등식
# =============================================================================

def check_ibp_identity(q: Potential, g: BoundaryDatum, f: SourceFunction, grids: DiskGrids, *,
                       refine: bool = True) -> IdentityReport:
    a = grids.order
    gam = kernel_constants(a).gamma_factor
    u = solve_large_dirichlet(q, g, grids)
    v = solve_exterior_dirichlet(q, f, grids)
    interior = grids.interior
    # ∫ v(−qu) − ∫ u(h − qv)
    lhs = interior.integrate(v.interior_values * (-q.values * u.interior_values)) \
        - interior.integrate(u.interior_values * (v.source_field - q.values * v.interior_values))
    pairing = _boundary_pairing(grids, u.trace_am1, v.trace_a)
    rhs = -gam * pairing
    fitted = -lhs / pairing if pairing != 0 else math.nan
    report = IdentityReport.from_sides(
        "ibp", lhs, rhs, grids, fitted_constant=fitted, gamma_factor=gam,
        condition=max(u.condition, v.condition))
    logger.info("[verify] ibp lhs=%.6e rhs=%.6e rel=%.2e", lhs, rhs, report.relative_residual)
    return _with_refinement(report, check_ibp_identity, q, g, f, grids, refine)


def check_gov_identity(q: Potential, g: BoundaryDatum, f: SourceFunction, grids: DiskGrids, *,
                       refine: bool = True) -> IdentityReport:
    if np.any(g.values[~grids.boundary.sigma_mask] != 0):
        raise InvalidParameterError("gov 점검: g 는 Σ 안에 지지되어야 한다")
    a = grids.order
    gam = kernel_constants(a).gamma_factor
    u = solve_large_dirichlet(q, g, grids)
    v = solve_exterior_dirichlet(q, f, grids)
    lap_f = exterior_fractional_laplacian(f, grids.interior.nodes, a, grids.patch)
    lhs = grids.interior.integrate(u.interior_values * lap_f)
    pairing = _boundary_pairing(grids, u.trace_am1, v.trace_a, on_sigma=True)
    rhs = -gam * pairing
    report = IdentityReport.from_sides("gov", lhs, rhs, grids,
                                       fitted_constant=-lhs / pairing if pairing else math.nan)
    logger.info("[verify] gov lhs=%.6e rhs=%.6e rel=%.2e", lhs, rhs, report.relative_residual)
    return _with_refinement(report, check_gov_identity, q, g, f, grids, refine)


def check_gov_difference(q1: Potential, q2: Potential, g: BoundaryDatum, f: SourceFunction,
                         grids: DiskGrids) -> IdentityReport:
    """두 퍼텐셜의 gov 항등식 차: ∫(u₁−u₂)(−Δ)^a f = −ΓΓ∫_Σ g (A_{q₁}f − A_{q₂}f).
    응답이 같으면 좌변이 0 - 증명의 직교 단계."""
    a = grids.order
    gam = kernel_constants(a).gamma_factor
    lap_f = exterior_fractional_laplacian(f, grids.interior.nodes, a, grids.patch)
    u1, u2 = (solve_large_dirichlet(q, g, grids) for q in (q1, q2))
    v1, v2 = (solve_exterior_dirichlet(q, f, grids) for q in (q1, q2))
    lhs = grids.interior.integrate((u1.interior_values - u2.interior_values) * lap_f)
    rhs = -gam * _boundary_pairing(grids, u1.trace_am1, v1.trace_a - v2.trace_a, on_sigma=True)
    scale = max(abs(grids.interior.integrate(u1.interior_values * lap_f)), TINY)
    return IdentityReport.from_sides("gov-difference", lhs, rhs, grids, floor=scale,
                                     trace_gap=float(np.max(np.abs(v1.trace_a - v2.trace_a))))


def _probe_points(grids: DiskGrids, count: int, seed: int, radius: float = 0.8) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = grids.geometry.radius
    rho = radius * r * np.sqrt(rng.uniform(0.0, 1.0, count))
    phi = rng.uniform(0.0, 2.0 * math.pi, count)
    return grids.geometry.point(rho, phi)


def check_local_characterization(g: BoundaryDatum, grids: DiskGrids, *, candidate=None,
                                 probes: int = 20, seed: int | None = None,
                                 level: int = 3) -> IdentityReport:
    """q ≡ 0 에서 큰 해 후보 u (기본 P_a g) 를 점검한다.

    (i)  ratio = u / gap^{a−1} 의 5점 차분 라플라시안 (relative_residual)
    (ii) ratio 와 g 의 조화 확장 차 (ratio_error)
    (iii) u 의 p.v. (−Δ)^a 잔차 (pv_relative_residual)
    셋 모두 한도 안이어야 passed.
    """
    a = grids.order
    seed = settings.DEFAULT_SEED if seed is None else seed
    boundary = grids.boundary
    pts = _probe_points(grids, probes, seed)
    geometry = grids.geometry

    if candidate is None:
        def candidate(p):
            return poisson_large(p, g, a, boundary)

    def ratio(p):
        return candidate(p) / geometry.gap(p) ** (a - 1.0)

    h = FD_STEP
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    lap = (ratio(pts + ex) + ratio(pts - ex) + ratio(pts + ey) + ratio(pts - ey)
           - 4.0 * ratio(pts)) / (h * h)
    extension = harmonic_extension(g, pts, boundary)
    scale = max(float(np.max(np.abs(extension))), TINY)
    ratio_error = float(np.max(np.abs(ratio(pts) - extension))) / scale

    large = ProfileFunction(candidate, Smoothness.LARGE_CLASS,
                            support_radius=geometry.radius, exponent=a - 1.0,
                            center=geometry.center)
    pv = [pv_fractional_laplacian(large, p, a, 2, level) for p in pts]
    pv_rel = max(abs(o.value) / max(o.magnitude, TINY) for o in pv)

    lap_max = float(np.max(np.abs(lap)))
    report = IdentityReport.from_sides(
        "local", lap_max, 0.0, grids, floor=scale, tolerance=LOCAL_TOLERANCE,
        limits={"ratio_error": LOCAL_TOLERANCE, "pv_relative_residual": PV_TOLERANCE},
        ratio_error=ratio_error, pv_relative_residual=pv_rel, probes=probes, seed=seed)
    logger.info("[verify] local Δ(ratio)=%.2e ratio=%.2e pv=%.2e passed=%s", lap_max, ratio_error,
                pv_rel, report.passed)
    return report


# =============================================================================
# 단사성 결여 반례
# =============================================================================

@dataclass
class Counterexample:
    g: np.ndarray            # 내부 노드 위 소스
    v: np.ndarray            # G[g]
    trace: np.ndarray        # v/d^a on ∂Ω
    ratio: float
    report: IdentityReport


def _harmonic_basis(z: np.ndarray, degree: int, omega_radius: float) -> np.ndarray:
    w = z / omega_radius
    cols = [np.ones(len(z))]
    for k in range(1, degree + 1):
        zk = w ** k
        cols.extend([zk.real, zk.imag])
    return np.column_stack(cols)


def _project_out(values: np.ndarray, basis: np.ndarray, weights: np.ndarray) -> np.ndarray:
    sw = np.sqrt(weights)
    qmat, _ = qr(sw[:, None] * basis, mode="economic")
    xw = sw * values
    return (xw - qmat @ (qmat.T @ xw)) / sw


def counterexample_constructor(a, omega_radius: float, degree: int, grids: DiskGrids, *,
                               seed: int | None = None, field_values=None) -> Counterexample:
    """ω = B(θ, omega_radius) 위 조화다항식 (차수 ≤ degree) 에 직교인 h 로
    g = h·gap^{1−a} 를 만들고 (−Δ)^a v = g (외부 0) 의 트레이스를 잰다."""
    a = grids.order if a is None else float(a)
    if abs(a - grids.order) > 1e-12:
        grids = grids.with_order(a)
    r = grids.geometry.radius
    if not 0 < omega_radius < r:
        raise InvalidParameterError(f"omega_radius={omega_radius}: 0 < ω < r")
    if degree < 2:
        raise InvalidParameterError(f"degree={degree} < 2")
    interior = grids.interior
    inside = interior.node_rho < omega_radius
    rel = interior.geometry.relative(interior.nodes[inside])
    basis = _harmonic_basis(rel[:, 0] + 1j * rel[:, 1], degree, omega_radius)
    if inside.sum() <= basis.shape[1]:
        raise InvalidParameterError(
            f"ω 안 노드 {inside.sum()} 개 ≤ 조화 기저 {basis.shape[1]} 개: 격자를 늘려라")
    wts = interior.weights[inside]
    seed = settings.DEFAULT_SEED if seed is None else seed

    attempts = 1 if field_values is not None else MAX_ATTEMPTS
    h = None
    used_seed = seed
    for attempt in range(attempts):
        if field_values is not None:
            raw = np.asarray(field_values, dtype=float)
            raw = raw[inside] if raw.shape == (interior.size,) else raw
        else:
            used_seed = seed + attempt
            raw = np.random.default_rng(used_seed).standard_normal(int(inside.sum()))
        cand = _project_out(raw, basis, wts)
        if np.sqrt(wts @ cand ** 2) > PROJECTION_FLOOR * np.sqrt(wts @ raw ** 2):
            h = cand
            break
        logger.warning("[verify] 반례 사영 붕괴 (seed=%d), 재시도", used_seed)
    if h is None:
        raise DegenerateProjectionError(
            f"조화함수 직교 사영이 {attempts}회 모두 0 으로 붕괴 (degree={degree})")

    g = np.zeros(interior.size)
    g[inside] = h * interior.gap[inside] ** (1.0 - a)
    green = green_operator(grids, a)
    v = green.matrix @ g
    trace = green.trace_matrix @ g
    v_norm = math.sqrt(interior.integrate(v * v))
    trace_max = float(np.max(np.abs(trace)))
    ratio = trace_max / v_norm if v_norm > 0 else math.inf
    report = IdentityReport.from_sides(
        "counterexample", trace_max, 0.0, grids, floor=v_norm,
        tolerance=COUNTEREXAMPLE_TOLERANCE, ratio=ratio, v_norm=v_norm, degree=degree,
        omega_radius=omega_radius, seed=used_seed)
    logger.info("[verify] 반례 degree=%d ratio=%.3e ‖v‖=%.3e", degree, ratio, v_norm)
    return Counterexample(g=g, v=v, trace=trace, ratio=ratio, report=report)


# =============================================================================
# 경계 UCP · 치역 조밀성
# =============================================================================

def ucp_data(boundary, modes: int = UCP_MODES) -> list[BoundaryDatum]:
    """1, cos k, sin k, ... 순서의 푸리에 모드 자료 modes 개."""
    data = [fourier_datum(boundary, 0)]
    k = 1
    while len(data) < modes:
        data.append(fourier_datum(boundary, k, "cos"))
        if len(data) < modes:
            data.append(fourier_datum(boundary, k, "sin"))
        k += 1
    return data


@dataclass
class UcpReport:
    arc: tuple
    singular_values: np.ndarray
    full_circle_min: float
    rows: int
    matrix: np.ndarray = field(repr=False, default=None)

    @property
    def min_singular(self) -> float:
        return float(self.singular_values[-1])

    @property
    def passed(self) -> bool:
        return self.min_singular > 0

    def traces(self, coefficients) -> np.ndarray:
        return self.matrix @ np.asarray(coefficients, dtype=float)

    def summary(self) -> tuple[float, float, float]:
        ref = self.full_circle_min
        return self.min_singular, ref, 1.0 - self.min_singular / ref if ref > 0 else 0.0

    def as_dict(self) -> dict:
        return {"check": "ucp", "arc": list(self.arc), "rows": self.rows,
                "min_singular": self.min_singular, "full_circle_min": self.full_circle_min,
                "singular_values": [float(s) for s in self.singular_values], "passed": self.passed}


def boundary_ucp_probe(a, gamma_arc, grids: DiskGrids, *, q: Potential | None = None,
                       modes: int = UCP_MODES) -> UcpReport:
    """계수 → (u/d^{a−1}, γ_{a−1,1}u)|_Γ 의 최소 특이값. 해 노름 ‖u·gap^{1−a}‖ 으로 정규화."""
    a = grids.order if a is None else float(a)
    if abs(a - grids.order) > 1e-12:
        grids = grids.with_order(a)
    full = grids.with_sigma(FULL_CIRCLE)
    boundary = full.boundary
    arc = sigma_mask(boundary.angles, gamma_arc)
    q = q or Potential.zero(full.interior)
    data = ucp_data(boundary, modes)
    sols = [solve_large_dirichlet(q, g, full) for g in data]
    am1 = np.column_stack([u.trace_am1 for u in sols])
    neu = np.column_stack([neumann_trace_large(u, g, full) for u, g in zip(sols, data)])
    gap = full.interior.gap
    unorm = np.column_stack([u.interior_values * gap ** (1.0 - a) for u in sols])
    _, rmat = qr(np.sqrt(full.interior.weights)[:, None] * unorm, mode="economic")
    sw = np.sqrt(boundary.arc_weights)

    def normalized(mask):
        rows = np.vstack([sw[mask, None] * am1[mask], sw[mask, None] * neu[mask]])
        return solve_triangular(rmat, rows.T, trans="T", lower=False).T

    mat = normalized(arc)
    sv = svdvals(mat)
    ref = float(svdvals(normalized(np.ones_like(arc)))[-1])
    logger.info("[verify] ucp Γ=%s σ_min=%.3e (전체 원 %.3e)", tuple(gamma_arc), sv[-1], ref)
    return UcpReport(arc=tuple(float(v) for v in gamma_arc), singular_values=sv,
                     full_circle_min=ref, rows=mat.shape[0], matrix=mat)


@dataclass
class RangeReport:
    sizes: list
    ranks: list              # 각 크기의 {threshold: rank}
    singular_values: list

    def ranks_at(self, threshold: float) -> list[int]:
        return [r[threshold] for r in self.ranks]

    @property
    def monotone(self) -> bool:
        return all(np.all(np.diff(self.ranks_at(t)) >= 0) for t in self.ranks[0]) if self.ranks else True

    @property
    def passed(self) -> bool:
        return self.monotone

    def summary(self) -> tuple[float, float, float]:
        """(가장 큰 부분집합의 1e−8 계수, 그 열 수, 1 − 계수/열 수)"""
        rank = self.ranks[-1][max(self.ranks[-1])]
        size = self.sizes[-1]
        return float(rank), float(size), 1.0 - rank / size

    def as_dict(self) -> dict:
        return {"check": "range", "sizes": self.sizes, "passed": self.passed,
                "ranks": [{f"{k:g}": v for k, v in r.items()} for r in self.ranks],
                "singular_values": [[float(s) for s in sv] for sv in self.singular_values]}


def range_density_probe(response: ResponseMatrix, sizes=(2, 4, 8, 16)) -> RangeReport:
    """중첩 열 부분집합의 계수. 문턱은 가장 큰 부분집합의 σ_max 기준."""
    subsets = nested_columns(response, sizes)
    if not subsets:
        raise InvalidParameterError("응답 행렬 열 수가 가장 작은 크기보다 작다")
    reference = float(svdvals(subsets[-1].entries)[0])
    reports = [response_conditioning(s, reference) for s in subsets]
    return RangeReport(sizes=[s.shape[1] for s in subsets], ranks=[r.ranks for r in reports],
                       singular_values=[r.singular_values for r in reports])


# =============================================================================
# 묶음 실행
# =============================================================================

SUITE_CHECKS = ("ibp", "gov", "local", "counterexample", "ucp", "range")


def run_suite(grids: DiskGrids, q: Potential, f: SourceFunction, g: BoundaryDatum, *,
              response: ResponseMatrix | None = None, checks=("all",), seed: int | None = None,
              omega_radius: float = 0.4, degree: int = 10) -> list:
    """이름 붙은 점검 (또는 all) 을 차례로 실행. 수치 실패도 보고서로 남긴다."""
    wanted = SUITE_CHECKS if "all" in checks else tuple(checks)
    unknown = [c for c in wanted if c not in SUITE_CHECKS]
    if unknown:
        raise InvalidParameterError(f"알 수 없는 점검: {unknown}")
    seed = settings.DEFAULT_SEED if seed is None else seed
    full = grids.with_sigma(FULL_CIRCLE)
    runners = {
        "ibp": lambda: check_ibp_identity(q, g, f, grids),
        "gov": lambda: check_gov_identity(q, g, f, grids),
        "local": lambda: check_local_characterization(fourier_datum(full.boundary, 1), full, seed=seed),
        "counterexample": lambda: counterexample_constructor(
            grids.order, omega_radius, degree, grids, seed=seed).report,
        "ucp": lambda: boundary_ucp_probe(grids.order, grids.boundary.sigma, grids),
        "range": lambda: range_density_probe(response),
    }
    reports = []
    for name in wanted:
        if name == "range" and response is None:
            continue
        try:
            reports.append(runners[name]())
        except FraclabError as exc:
            logger.error("[verify] %s 실패: %s", name, exc)
            reports.append(IdentityReport(name, math.nan, math.nan, math.inf, grids.spec,
                                          details={"error": str(exc)}))
    return reports
