"""
퍼텐셜 복원 (가우스-뉴턴 + 티호노프)
====================================
응답 자료 A_q^Σ 로부터 q 를 복원한다.

  목적함수   Φ(q) = ‖A(q) − D‖_F² + λ‖L q‖²,  L = 내부 격자의 이산 기울기
  선형화     δA_j = −E_Σ (δq ⊙ w_j),  E = Tr − Tr Q (I + S Q)^{−1} S  (수반 상태)
  λ 선택     불일치 원리: ‖A(q_λ) − D‖_F ≤ 1.1 · noise_level · ‖D‖_F 를 만족하는 최대 λ

regularization_weight 는 시작점의 tr(JᵀJ)/tr(LᵀL) 에 대한 상대값이다.
자료 벡터는 소스 우선 순서 (열 j 블록) 로 편다.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import solve
from scipy.signal import resample

from ..core.config import settings
from ..core.errors import ConditioningError, DivergenceError, InvalidParameterError
from .domain_geometry import DiskGrids, InteriorGrid
from .forward_solver import SUPPORT_FRACTION, Potential, exterior_solutions, factorize
from .response_map import (ResponseMatrix, SourceBasis, assemble_response, full_traces,
                           response_meta)

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MAX_HALVINGS = 20
DISCREPANCY_FACTOR = 1.1
PLATEAU_RATIO = 0.99
PLATEAU_ONSET = 0.5        # 정체 판정은 불일치가 q = 0 값의 절반 아래일 때만
WEIGHT_LADDER = tuple(10.0 ** (k / 2.0) for k in range(12, -13, -1))   # 1e6 … 1e−6, 배율 √10
REFINEMENT = 1.5
RESOLUTION_FACTOR = 10.0


@dataclass(frozen=True)
class InversionConfig:
    regularization_weight: float = 1e-3
    max_iterations: int = 20
    step_tolerance: float = 1e-6
    noise_level: float = 0.0
    seed: int = settings.DEFAULT_SEED
    inverse_crime: bool = False

    def __post_init__(self):
        if not self.regularization_weight > 0:
            raise InvalidParameterError(f"regularization_weight={self.regularization_weight} ≤ 0")
        if self.max_iterations < 1:
            raise InvalidParameterError(f"max_iterations={self.max_iterations} < 1")
        if self.noise_level < 0:
            raise InvalidParameterError(f"noise_level={self.noise_level} < 0")
        if self.step_tolerance < 0:
            raise InvalidParameterError(f"step_tolerance={self.step_tolerance} < 0")

    def replace(self, **changes) -> "InversionConfig":
        return InversionConfig(**{**asdict(self), **changes})


@dataclass
class ReconstructionResult:
    q_estimate: Potential
    residual_history: list
    misfit: float                 # ‖A(q̂) − D‖_F
    initial_misfit: float
    regularization: float         # 절대 λ
    iterations: int
    converged: bool
    config: dict
    relative_error: float | None = None
    weight: float | None = None   # 상대 λ (q = 0 단이면 inf)
    trail: list = field(default_factory=list)   # 불일치 원리 단별 기록

    def as_dict(self) -> dict:
        return {
            "residual_history": list(self.residual_history), "misfit": self.misfit,
            "initial_misfit": self.initial_misfit, "regularization": self.regularization,
            "weight": self.weight,
            "iterations": self.iterations, "converged": self.converged,
            "relative_error": self.relative_error, "config": self.config,
            "q_hash": self.q_estimate.digest, "trail": self.trail,
        }


# =============================================================================
# 자료 합성
# =============================================================================

def resample_traces(traces: np.ndarray, count: int) -> np.ndarray:
    """전체 원 위 등각 트레이스 (행 = 각도) 를 count 개 각도로 FFT 재표본."""
    traces = np.asarray(traces, dtype=float)
    if traces.shape[0] == count:
        return traces
    return resample(traces, count, axis=0)


def _refined_response(q: Potential, basis: SourceBasis, grids: DiskGrids,
                      factor: float = REFINEMENT) -> tuple[np.ndarray, DiskGrids]:
    """조밀한 격자에서 푼 A_q^Σ 를 grids 의 Σ 각도로 재표본."""
    fine = grids.refined(factor)
    traces, _, _, _ = full_traces(q.resample(fine.interior), basis, fine)
    return resample_traces(traces, grids.boundary.size)[grids.boundary.sigma_mask], fine


def synthesize_data(q_true: Potential, basis: SourceBasis, noise_level: float, seed: int,
                    grids: DiskGrids, *, inverse_crime: bool = True) -> ResponseMatrix:
    """A_{q_true}^Σ + 가우스 잡음 (σ = noise_level · ‖A‖_F / √개수).
    inverse_crime=False 이면 1.5배 조밀한 격자에서 풀고 복원 격자 각도로 재표본한다."""
    if noise_level < 0:
        raise InvalidParameterError(f"noise_level={noise_level} < 0")
    if inverse_crime:
        clean = assemble_response(q_true, basis, grids).entries
        synthesis = grids.spec
    else:
        clean, fine = _refined_response(q_true, basis, grids)
        synthesis = fine.spec
    noisy = clean
    if noise_level > 0:
        sigma = noise_level * np.linalg.norm(clean) / math.sqrt(clean.size)
        rng = np.random.default_rng(seed)
        noisy = clean + rng.normal(0.0, sigma, clean.shape)
    meta = response_meta(q_true, basis, grids, grids.order)
    meta.update(noise_level=noise_level, seed=seed, inverse_crime=inverse_crime,
                synthesis_grid=synthesis)
    logger.info("[invert] 자료 합성 %s, noise=%.3g, inverse_crime=%s", clean.shape, noise_level,
                inverse_crime)
    return ResponseMatrix(noisy, meta)


# =============================================================================
# 선형화
# =============================================================================

@dataclass(frozen=True, eq=False)
class Linearization:
    data: np.ndarray          # A(q)|_Σ (Σ × J)
    states: np.ndarray        # 내부해 W (N × J)
    sensitivity: np.ndarray   # E_Σ (Σ × N)


def linearize(q: Potential, basis: SourceBasis, grids: DiskGrids) -> Linearization:
    a = grids.order
    mask = grids.boundary.sigma_mask
    op = factorize(grids, q, a)
    w, _, traces, op, _ = exterior_solutions(q, list(basis.sources), grids, a, op)
    green = op.green
    if np.any(op.q != 0):
        # (I + SQ)ᵀ Xᵀ = Q Trᵀ
        xt, _ = op.solve(op.q[:, None] * green.trace_matrix.T, transpose=True)
        sens = green.trace_matrix - xt.T @ green.matrix
    else:
        sens = green.trace_matrix
    return Linearization(data=traces[mask], states=w, sensitivity=sens[mask])


def frechet_derivative(q: Potential, basis: SourceBasis, direction, grids: DiskGrids,
                       lin: Linearization | None = None) -> ResponseMatrix:
    """δq 방향의 δA^Σ. 분해는 q 에서 한 번만."""
    lin = lin or linearize(q, basis, grids)
    dq = np.asarray(getattr(direction, "values", direction), dtype=float)
    return ResponseMatrix(-lin.sensitivity @ (dq[:, None] * lin.states),
                          {"direction": "frechet", "q_hash": q.digest})


def _jacobian(lin: Linearization, params: np.ndarray) -> np.ndarray:
    """(Σ·J) × P, 소스 우선 블록."""
    e = lin.sensitivity[:, params]
    return np.vstack([-e * lin.states[params, j][None, :] for j in range(lin.states.shape[1])])


def _flatten(entries: np.ndarray) -> np.ndarray:
    return np.asarray(entries).T.reshape(-1)


def gradient_operator(interior: InteriorGrid, params: np.ndarray) -> sparse.csr_matrix:
    """지지 노드 매개변수의 이산 기울기. 지지 밖 이웃은 0 으로 고정된 값으로 본다."""
    nr, m = interior.radial_count, interior.angular_count
    col = -np.ones(interior.size, dtype=int)
    col[params] = np.arange(len(params))
    nodes, wts = interior.nodes, interior.weights
    rows, cols, vals = [], [], []
    edges = []
    for i in range(nr):
        for l in range(m):
            k = i * m + l
            edges.append((k, i * m + (l + 1) % m))
            if i + 1 < nr:
                edges.append((k, (i + 1) * m + l))
    row = 0
    for p, s in edges:
        if col[p] < 0 and col[s] < 0:
            continue
        scale = math.sqrt(0.5 * (wts[p] + wts[s])) / np.linalg.norm(nodes[p] - nodes[s])
        for node, sign in ((p, 1.0), (s, -1.0)):
            if col[node] >= 0:
                rows.append(row)
                cols.append(col[node])
                vals.append(sign * scale)
        row += 1
    return sparse.csr_matrix((vals, (rows, cols)), shape=(row, len(params)))


def support_parameters(interior: InteriorGrid, support_radius: float) -> np.ndarray:
    return np.flatnonzero(interior.node_rho <= support_radius)


# =============================================================================
# 가우스-뉴턴
# =============================================================================

def _check_data(data: ResponseMatrix, basis: SourceBasis, grids: DiskGrids) -> None:
    expected = (grids.boundary.sigma_count, len(basis))
    if data.shape != expected:
        raise InvalidParameterError(f"자료 크기 {data.shape} ≠ (Σ 노드, 소스) {expected}")
    a = data.meta.get("a")
    if a is not None and abs(float(a) - grids.order) > 1e-12:
        raise InvalidParameterError(f"자료 a={a} ≠ 격자 차수 {grids.order}")


def relative_l2_error(q_est: Potential, q_true: Potential, interior: InteriorGrid) -> float:
    truth = q_true.values if len(q_true.values) == interior.size else q_true.resample(interior).values
    norm = math.sqrt(interior.integrate(truth ** 2))
    diff = math.sqrt(interior.integrate((q_est.values - truth) ** 2))
    return diff / norm if norm > 0 else diff


def reconstruct_gauss_newton(data: ResponseMatrix, basis: SourceBasis, config: InversionConfig,
                             grids: DiskGrids, *, support_radius: float | None = None,
                             q_init: Potential | None = None, q_true: Potential | None = None,
                             regularization: float | None = None) -> ReconstructionResult:
    """regularization 을 주면 (절대 λ) regularization_weight 대신 그대로 쓴다."""
    _check_data(data, basis, grids)
    interior = grids.interior
    support = support_radius or SUPPORT_FRACTION * grids.geometry.radius
    params = support_parameters(interior, support)
    grad = gradient_operator(interior, params)
    ltl = (grad.T @ grad).toarray()
    target = _flatten(data.entries)

    def potential(x):
        vals = np.zeros(interior.size)
        vals[params] = x
        return Potential.on_grid(interior, vals, support, label="estimate")

    x = np.zeros(len(params)) if q_init is None else np.asarray(q_init.values, dtype=float)[params]
    lin = linearize(potential(x), basis, grids)
    r = _flatten(lin.data) - target
    jac = _jacobian(lin, params)
    weight = None
    if regularization is None:
        scale = np.trace(jac.T @ jac) / max(np.trace(ltl), 1e-300)
        regularization = config.regularization_weight * scale
        weight = config.regularization_weight
    lam = float(regularization)

    def objective(res, xv):
        return float(res @ res + lam * xv @ ltl @ xv)

    phi = objective(r, x)
    initial_misfit = float(np.linalg.norm(r))
    history = [phi]
    converged = phi == 0.0
    iterations = 0
    while not converged and iterations < config.max_iterations:
        g = jac.T @ r + lam * ltl @ x
        hess = jac.T @ jac + lam * ltl
        step = solve(hess, -g, assume_a="sym")
        slope = 2.0 * float(g @ step)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = x + t * step
            try:
                trial_lin = linearize(potential(trial), basis, grids)
            except ConditioningError:
                t *= 0.5
                continue
            trial_r = _flatten(trial_lin.data) - target
            trial_phi = objective(trial_r, trial)
            if trial_phi <= phi + ARMIJO_C * t * slope:
                break
            t *= 0.5
        else:
            raise DivergenceError(
                f"[invert] Armijo 선탐색 {MAX_HALVINGS}회 반감 후에도 감소 없음 (iter {iterations})",
                history=history)
        iterations += 1
        moved = t * np.linalg.norm(step)
        x, lin, r, phi = trial, trial_lin, trial_r, trial_phi
        jac = _jacobian(lin, params)
        history.append(phi)
        logger.debug("[invert] iter %d Φ=%.6e step=%.2e t=%.3g", iterations, phi, moved, t)
        if moved <= config.step_tolerance * max(1.0, np.linalg.norm(x)):
            converged = True

    q_hat = potential(x)
    result = ReconstructionResult(
        q_estimate=q_hat, residual_history=history, misfit=float(np.linalg.norm(r)),
        initial_misfit=initial_misfit, regularization=lam, iterations=iterations,
        converged=converged, config=asdict(config), weight=weight,
    )
    if q_true is not None:
        result.relative_error = relative_l2_error(q_hat, q_true, interior)
    logger.info("[invert] λ=%.3e iter=%d misfit %.3e → %.3e", lam, iterations, initial_misfit,
                result.misfit)
    return result


def _zero_result(zero: Potential, misfit: float, config: InversionConfig, interior: InteriorGrid,
                 q_true: Potential | None) -> ReconstructionResult:
    result = ReconstructionResult(
        q_estimate=zero, residual_history=[misfit * misfit], misfit=misfit, initial_misfit=misfit,
        regularization=math.inf, iterations=0, converged=True, config=asdict(config),
        weight=math.inf,
    )
    if q_true is not None:
        result.relative_error = relative_l2_error(zero, q_true, interior)
    return result


def select_regularization(data: ResponseMatrix, basis: SourceBasis, config: InversionConfig,
                          grids: DiskGrids, *, q_true: Potential | None = None,
                          ladder=WEIGHT_LADDER, support_radius: float | None = None) -> ReconstructionResult:
    """λ 사다리를 큰 쪽부터 웜스타트로 내려가며 불일치 원리를 만족하는 최대 λ 를 고른다.

    첫 단은 λ = ∞ (q = 0) 이다. 그 불일치가 이미 목표 안이면 0 을 돌려준다.
    불일치가 q = 0 값의 절반 아래로 내려간 뒤 정체하면 (감소 < 1%) 직전 λ 에서 멈춘다 - 모델 오차 바닥.
    trail 에는 시도한 모든 단 (weight, 절대 λ, misfit, 반복 수) 이 남고 선택된 단도 그중 하나다.
    """
    _check_data(data, basis, grids)
    target = DISCREPANCY_FACTOR * config.noise_level * float(np.linalg.norm(data.entries))
    zero = Potential.zero(grids.interior, support_radius)
    zero_misfit = float(np.linalg.norm(linearize(zero, basis, grids).data - data.entries))
    trail = [{"weight": math.inf, "regularization": math.inf, "misfit": zero_misfit, "iterations": 0}]
    chosen, previous = None, None
    if zero_misfit <= target:
        chosen = _zero_result(zero, zero_misfit, config, grids.interior, q_true)
        ladder = ()
    for weight in ladder:
        result = reconstruct_gauss_newton(
            data, basis, config.replace(regularization_weight=weight), grids,
            support_radius=support_radius, q_init=previous.q_estimate if previous else None,
            q_true=q_true,
            regularization=None if previous is None else previous.regularization * weight / previous.weight,
        )
        result.weight = weight
        trail.append({"weight": weight, "regularization": result.regularization,
                      "misfit": result.misfit, "iterations": result.iterations})
        logger.debug("[invert] 사다리 weight=%.1e λ=%.3e misfit=%.3e", weight, result.regularization,
                     result.misfit)
        if result.misfit <= target:
            chosen = result
            break
        if (previous is not None and previous.misfit <= PLATEAU_ONSET * zero_misfit
                and result.misfit >= PLATEAU_RATIO * previous.misfit):
            chosen = previous
            break
        previous = result
    chosen = chosen or previous
    chosen.trail = trail
    logger.info("[invert] 불일치 원리: 목표 %.3e, 선택 weight=%.1e λ=%.3e (misfit %.3e, %d단)", target,
                chosen.weight, chosen.regularization, chosen.misfit, len(trail))
    return chosen


# =============================================================================
# 구별 가능성
# =============================================================================

@dataclass
class SeparationReport:
    """separation 을 같은 q1 응답의 격자 세분 차이 (이산화 오차) 와 견준다."""
    separation: float
    per_source: list
    discretization_error: float

    @property
    def resolution_ratio(self) -> float:
        return self.separation / max(self.discretization_error, 1e-300)

    @property
    def distinguishable(self) -> bool:
        return self.resolution_ratio >= RESOLUTION_FACTOR

    def as_dict(self) -> dict:
        return {"separation": self.separation, "per_source": self.per_source,
                "discretization_error": self.discretization_error,
                "resolution_ratio": self.resolution_ratio, "distinguishable": self.distinguishable}


def discretization_error(q: Potential, basis: SourceBasis, grids: DiskGrids,
                         coarse: np.ndarray | None = None) -> float:
    """‖A_q(grids) − A_q(grids.refined())‖_F / ‖A_q(grids)‖_F, Σ 행만."""
    if coarse is None:
        coarse = assemble_response(q, basis, grids).entries
    fine, _ = _refined_response(q, basis, grids)
    norm = np.linalg.norm(coarse)
    diff = float(np.linalg.norm(coarse - fine))
    return diff / norm if norm > 0 else diff


def distinguishability_test(q1: Potential, q2: Potential, basis: SourceBasis, sigma,
                            grids: DiskGrids) -> SeparationReport:
    narrow = grids.with_sigma(sigma)
    a1 = assemble_response(q1, basis, narrow).entries
    a2 = assemble_response(q2, basis, narrow).entries
    diff = a1 - a2
    norm = np.linalg.norm(a1)
    sep = float(np.linalg.norm(diff) / norm) if norm > 0 else float(np.linalg.norm(diff))
    floor = discretization_error(q1, basis, narrow, a1)
    logger.info("[invert] 구별: separation=%.3e 이산화 오차=%.3e (비 %.1f)", sep, floor,
                sep / max(floor, 1e-300))
    return SeparationReport(sep, [float(v) for v in np.max(np.abs(diff), axis=0)], floor)
