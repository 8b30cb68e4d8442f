"""
외부 → 경계 응답 행렬
=====================
외부 소스 기저 f_j (W 위 가우시안 범프) 마다 외부자료 문제를 풀고
정칙 트레이스 u/d^a 를 Σ 위에서 모은 행렬 A_q^Σ 를 만든다. 역문제의 자료 객체.

  · default_source_basis   W 중간 원 위 등각 범프
  · assemble_response      열 j = trace_a(solve_exterior(q, f_j)) |_Σ
  · response_conditioning  특이값 · 수치 계수 {1e−8, 1e−12} · 감쇠 요약
  · boundedness_bound      q = 0 일 때 max|A| 의 계산 가능한 상한
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import svdvals

from ..core.errors import ConditioningError, InvalidParameterError
from .domain_geometry import DiskGrids, ExteriorPatch
from .forward_solver import Potential, SourceFunction, exterior_solutions, factorize
from .kernels import kernel_constants

logger = logging.getLogger(__name__)

RANK_THRESHOLDS = (1e-8, 1e-12)
TRUNCATION = 1e-14


@dataclass(frozen=True, eq=False)
class SourceBasis:
    sources: list
    centers: np.ndarray
    width: float

    def __post_init__(self):
        if len(self.sources) < 1:
            raise InvalidParameterError("소스 기저는 최소 1개")

    def __len__(self) -> int:
        return len(self.sources)

    def __getitem__(self, j):
        return self.sources[j]

    def subset(self, columns) -> "SourceBasis":
        columns = list(columns)
        return SourceBasis([self.sources[j] for j in columns], self.centers[columns], self.width)

    @property
    def spec(self) -> dict:
        return {"size": len(self), "width": self.width,
                "centers": [[float(c[0]), float(c[1])] for c in self.centers]}


def radial_spacing(patch: ExteriorPatch) -> float:
    edges = np.concatenate([[patch.inner_radius], np.sort(patch.radii), [patch.outer_radius]])
    return float(np.max(np.diff(edges)))


def source_bump(patch: ExteriorPatch, center, width: float, label: str = "bump") -> SourceFunction:
    """절단 가우시안. |y−c| ≥ width − (반경 노드 간격) 에서 정확히 0, 절단점 값 1e−14."""
    cutoff = width - radial_spacing(patch)
    if cutoff <= 0:
        raise InvalidParameterError(f"width={width}: 외부 패치 노드 간격보다 넓어야 한다")
    sigma = cutoff / math.sqrt(-math.log(TRUNCATION))
    d = np.hypot(*(patch.nodes - np.asarray(center, dtype=float)).T)
    values = np.where(d < cutoff, np.exp(-(d / sigma) ** 2), 0.0)
    return SourceFunction(values, label)


def default_source_basis(patch: ExteriorPatch, count: int = 8, width: float | None = None,
                         phase: float = 0.0) -> SourceBasis:
    """W 의 중간 원 위 count 개 등각 범프. width 기본 = 환형 두께의 절반."""
    if count < 1:
        raise InvalidParameterError(f"count={count}: 기저 크기 ≥ 1")
    thickness = patch.outer_radius - patch.inner_radius
    width = 0.5 * thickness if width is None else float(width)
    if width > 0.5 * thickness + 1e-12:
        raise InvalidParameterError(f"width={width} > 두께/2: 범프가 W 밖으로 나간다")
    mid = 0.5 * (patch.inner_radius + patch.outer_radius)
    angles = phase + 2.0 * math.pi * np.arange(count) / count
    centers = patch.geometry.point(np.full(count, mid), angles)
    sources = [source_bump(patch, c, width, f"bump{j}") for j, c in enumerate(centers)]
    return SourceBasis(sources, centers, width)


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    entries: np.ndarray       # (Σ 노드 수, 소스 수)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2:
            raise InvalidParameterError("응답 행렬은 2차원")
        if not np.all(np.isfinite(e)):
            raise InvalidParameterError("응답 행렬에 유한하지 않은 값")
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> tuple:
        return self.entries.shape

    def columns(self, idx) -> "ResponseMatrix":
        meta = dict(self.meta, columns=[int(j) for j in idx])
        return ResponseMatrix(self.entries[:, list(idx)], meta)


def response_meta(q: Potential, basis: SourceBasis, grids: DiskGrids, a: float) -> dict:
    return {"a": a, "q_hash": q.digest, "q_label": q.label, "grid": grids.spec,
            "basis": basis.spec, "sigma": list(grids.boundary.sigma)}


def full_traces(q: Potential, basis: SourceBasis, grids: DiskGrids, a=None):
    """(∂Ω 전체 트레이스 (M×J), ForwardOperator, 내부해 W, 소스장 H)"""
    a = grids.order if a is None else a
    op = factorize(grids, q, a)
    try:
        w, h, traces, op, res = exterior_solutions(q, list(basis.sources), grids, a, op)
    except ConditioningError:
        for j, f in enumerate(basis.sources):
            try:
                exterior_solutions(q, [f], grids, a, op)
            except ConditioningError as exc:
                raise ConditioningError(f"[respond] 소스 열 {j}: {exc}", condition=exc.condition,
                                        residual=exc.residual) from exc
        raise
    return traces, op, w, h


def assemble_response(q: Potential, basis: SourceBasis, grids: DiskGrids, sigma=None,
                      a=None) -> ResponseMatrix:
    if sigma is not None:
        grids = grids.with_sigma(sigma)
    a = grids.order if a is None else a
    mask = grids.boundary.sigma_mask
    if not mask.any():
        raise InvalidParameterError("Σ 가 비어 있다")
    traces, op, _, _ = full_traces(q, basis, grids, a)
    logger.info("[respond] A_q^Σ %d×%d (q=%s, cond=%.2e)", mask.sum(), len(basis), q.label,
                op.condition)
    return ResponseMatrix(traces[mask], response_meta(q, basis, grids, a))


@dataclass(frozen=True)
class ConditioningReport:
    singular_values: np.ndarray
    reference: float
    ranks: dict
    decay_rate: float         # log10 σ 의 인덱스당 평균 기울기
    dynamic_range: float      # log10(σ_max/σ_min)

    def as_dict(self) -> dict:
        return {
            "singular_values": [float(s) for s in self.singular_values],
            "reference": self.reference,
            "ranks": {f"{k:g}": v for k, v in self.ranks.items()},
            "decay_rate": self.decay_rate,
            "dynamic_range": self.dynamic_range,
        }


def response_conditioning(response: ResponseMatrix, reference: float | None = None) -> ConditioningReport:
    """계수 문턱은 reference (기본: 이 행렬의 σ_max) 에 대한 상대값."""
    e = response.entries
    if e.size == 0:
        raise InvalidParameterError("빈 응답 행렬")
    sv = svdvals(e)
    ref = float(sv[0]) if reference is None else float(reference)
    ranks = {t: int(np.sum(sv > t * ref)) for t in RANK_THRESHOLDS}
    positive = sv[sv > 0]
    if len(positive) >= 2:
        slope = float(np.polyfit(np.arange(len(positive)), np.log10(positive), 1)[0])
        dyn = float(np.log10(positive[0] / positive[-1]))
    else:
        slope, dyn = 0.0, 0.0
    return ConditioningReport(sv, ref, ranks, slope, dyn)


def nested_columns(response: ResponseMatrix, sizes=(2, 4, 8, 16)) -> list[ResponseMatrix]:
    """등각 기저의 중첩 부분집합: 크기 k 는 보폭 J/k 의 열 (J % k == 0), 아니면 앞 k 열."""
    j_total = response.shape[1]
    out = []
    for k in sizes:
        if k > j_total:
            continue
        idx = range(0, j_total, j_total // k) if j_total % k == 0 else range(k)
        out.append(response.columns(list(idx)[:k]))
    return out


def boundedness_bound(f: SourceFunction, grids: DiskGrids, a=None) -> float:
    """q = 0 에서 max_Σ |A_0 f| 의 상한.

    h_src ≤ C_{n,a}|W| sep^{−2−2a} ‖f‖_∞ 이고 ∫_Ω gap^a/(r^{2a}|x−ω|²) dx = π/a.
    """
    a = grids.order if a is None else a
    k = kernel_constants(a, grids.geometry.n)
    r = grids.geometry.radius
    patch = grids.patch
    h_bound = k.frac_constant * patch.area * patch.separation ** (-2.0 - 2.0 * a) * np.max(np.abs(f.values))
    return float((2.0 * r) ** a * k.green_scale * k.kappa_n * (math.pi / a) * h_bound)


def restrict_response(response: ResponseMatrix, grids: DiskGrids, sigma) -> tuple[ResponseMatrix, DiskGrids]:
    """Σ 를 더 작은 호로 줄인다 (같은 자료의 행 부분집합)."""
    narrow = grids.with_sigma(sigma)
    old, new = grids.boundary.sigma_mask, narrow.boundary.sigma_mask
    if np.any(new & ~old):
        raise InvalidParameterError(f"sigma={sigma} 가 원래 Σ={grids.boundary.sigma} 안에 있지 않다")
    meta = dict(response.meta, sigma=list(narrow.boundary.sigma))
    return ResponseMatrix(response.entries[new[old]], meta), narrow
