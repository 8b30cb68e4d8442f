"""
공의 닫힌꼴 커널
================
  · r0            R₀(x,z) = (r²−|x−θ|²)(r²−|z−θ|²) / (r²|x−z|²)
  · beta_integral ∫₀^R t^{a−1}(1+t)^{−n/2} dt  (τ = t/(1+t) 치환 → 불완전 베타)
  · green_disk    G(x,z) = c̃ |z−x|^{2a−n} · beta_integral(R₀), 공 밖이면 0
  · green_trace_kernel  lim_{z→ω} G(x,z)/(r²−|z−θ|²)^a = κ_n (r²−|x−θ|²)^a / (r^{2a}|x−ω|^n)
  · poisson_large (r²−|x−θ|²)^{a−1} · (고전 푸아송 확장)
  · exterior_source_field  h_src(x) = C_{n,a} ∫_W f(y)/|x−y|^{n+2a} dy  (= −(−Δ)^a f, x ∈ Ω)

정규화: c̃ = a·κ_n 를 그대로 쓴다. 이 상수로는 G 가 (−Δ)^a 의 역이 되지 않으므로
솔버는 green_scale = green_constant / c̃ 를 곱해 쓴다 (KernelConstants 참조).

원 위 함수는 경계 격자 각도의 삼각 보간으로 보고, 푸아송 확장은 FFT 계수에
(ρ/r)^{|k|} 를 곱해 정확히 계산한다.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import circulant
from scipy.special import beta as beta_fn, betainc, gamma, roots_jacobi

from ..core.errors import InvalidParameterError, SingularityError
from .domain_geometry import DiskGeometry, as_order

_FALLBACK_NODES = 64


@dataclass(frozen=True)
class KernelConstants:
    a: float
    n: int
    kappa_n: float            # 1/(n·α(n)), α(n) = 단위공 부피
    c_tilde: float            # a·κ_n
    frac_constant: float      # |C_{n,a}| = 4^a Γ(n/2+a) / (π^{n/2} |Γ(−a)|)
    gamma_factor: float       # Γ(a)Γ(a+1)
    green_constant: float     # Γ(n/2) / (4^a π^{n/2} Γ(a)²)
    torsion_eigenvalue: float  # (−Δ)^a (1−|x|²)_+^a = 4^a Γ(1+a) Γ(n/2+a)/Γ(n/2)

    @property
    def green_scale(self) -> float:
        return self.green_constant / self.c_tilde


@lru_cache(maxsize=64)
def kernel_constants(a, n: int = 2) -> KernelConstants:
    a = as_order(a)
    if n not in (1, 2):
        raise InvalidParameterError(f"n={n}: 1 또는 2 만 지원")
    ball_volume = math.pi ** (n / 2) / gamma(n / 2 + 1)
    kappa = 1.0 / (n * ball_volume)
    return KernelConstants(
        a=a, n=n, kappa_n=kappa, c_tilde=a * kappa,
        frac_constant=4.0 ** a * gamma(n / 2 + a) / (math.pi ** (n / 2) * abs(gamma(-a))),
        gamma_factor=gamma(a) * gamma(a + 1.0),
        green_constant=gamma(n / 2) / (4.0 ** a * math.pi ** (n / 2) * gamma(a) ** 2),
        torsion_eigenvalue=4.0 ** a * gamma(1.0 + a) * gamma(n / 2 + a) / gamma(n / 2),
    )


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def _values(obj) -> np.ndarray:
    return np.asarray(getattr(obj, "values", obj), dtype=float)


# =============================================================================
# 점별 커널
# =============================================================================

def r0(x, z, geometry: DiskGeometry | None = None):
    geometry = geometry or DiskGeometry()
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    gx, gz = geometry.gap(x), geometry.gap(z)
    if np.any(gx < 0) or np.any(gz < 0):
        raise InvalidParameterError("r0: 두 점 모두 닫힌 원판 안에 있어야 한다")
    diff2 = np.sum((x - z) ** 2, axis=-1)
    if np.any(diff2 == 0):
        raise SingularityError("r0: x = z 에서 R₀ 특이")
    return _out(gx * gz / (geometry.radius ** 2 * diff2))


def beta_integral(R, a, n: int = 2):
    a = as_order(a)
    R = np.asarray(R, dtype=float)
    if np.any(R < 0) or np.any(np.isnan(R)):
        raise InvalidParameterError("beta_integral: R ≥ 0 이어야 한다")
    b = n / 2.0 - a
    X = np.where(np.isinf(R), 1.0, R / (1.0 + np.where(np.isinf(R), 0.0, R)))
    if b > 0:
        return _out(betainc(a, b, X) * beta_fn(a, b))
    if np.any(X >= 1.0):
        raise InvalidParameterError("beta_integral: n/2 ≤ a 이면 R = ∞ 적분 발산")
    # 끝점 τ^{a−1} 은 Gauss-Jacobi 가중으로 흡수, (1−τ)^{b−1} 은 X < 1 에서 매끄럽다
    x, w = roots_jacobi(_FALLBACK_NODES, 0.0, a - 1.0)
    tau = X[..., None] * 0.5 * (1.0 + x)
    val = (0.5 * X) ** a * np.sum(w * (1.0 - tau) ** (b - 1.0), axis=-1)
    return _out(val)


def green_disk(x, z, a, geometry: DiskGeometry | None = None):
    geometry = geometry or DiskGeometry()
    a = as_order(a)
    k = kernel_constants(a, geometry.n)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    gx, gz = geometry.gap(x), geometry.gap(z)
    diff2 = np.sum((x - z) ** 2, axis=-1)
    inside = (gx > 0) & (gz > 0)
    if np.any(inside & (diff2 == 0)):
        raise SingularityError("green_disk: x = z 에서 커널 특이")
    safe = np.where(inside, diff2, 1.0)
    R = np.where(inside, gx * gz / (geometry.radius ** 2 * safe), 0.0)
    val = k.c_tilde * safe ** ((2.0 * a - geometry.n) / 2.0) * beta_integral(R, a, geometry.n)
    return _out(np.where(inside, val, 0.0))


def green_trace_kernel(x, omega, a, geometry: DiskGeometry | None = None):
    geometry = geometry or DiskGeometry()
    a = as_order(a)
    k = kernel_constants(a, geometry.n)
    x = np.asarray(x, dtype=float)
    omega = np.asarray(omega, dtype=float)
    r = geometry.radius
    om = np.hypot(*np.moveaxis(geometry.relative(omega), -1, 0))
    if np.any(np.abs(om - r) > 1e-9 * r):
        raise InvalidParameterError("green_trace_kernel: ω 는 원 |ω−θ| = r 위에 있어야 한다")
    gx = geometry.gap(x)
    if np.any(gx < -1e-12 * r * r):
        raise InvalidParameterError("green_trace_kernel: x 는 닫힌 원판 안에 있어야 한다")
    diff2 = np.sum((x - omega) ** 2, axis=-1)
    if np.any(diff2 == 0):
        raise SingularityError("green_trace_kernel: x = ω")
    return _out(k.kappa_n * np.maximum(gx, 0.0) ** a
                / (r ** (2.0 * a) * diff2 ** (geometry.n / 2.0)))


def torsion(x, a, geometry: DiskGeometry | None = None):
    """(−Δ)^a u = 1 in Ω, u = 0 밖 의 해 (r²−|x−θ|²)_+^a / λ₀."""
    geometry = geometry or DiskGeometry()
    k = kernel_constants(a, geometry.n)
    gx = np.maximum(geometry.gap(np.asarray(x, dtype=float)), 0.0)
    return _out(gx ** k.a / k.torsion_eigenvalue)


# =============================================================================
# 원 위 스펙트럴 연산
# =============================================================================

def mode_numbers(m: int) -> np.ndarray:
    return np.rint(np.fft.fftfreq(m, d=1.0 / m)).astype(int)


def harmonic_extension(g, points, boundary):
    """경계값 g 의 고전 조화확장 (삼각 보간 Σ ĝ_k (ρ/r)^{|k|} e^{ikφ})."""
    geometry = boundary.geometry
    values = _values(g)
    m = len(values)
    coef = np.fft.fft(values) / m
    k = mode_numbers(m)
    rho, phi = geometry.polar(np.asarray(points, dtype=float))
    t = np.clip(rho / geometry.radius, 0.0, 1.0)
    ang = phi - boundary.angles[0]
    basis = t[..., None] ** np.abs(k) * np.exp(1j * k * ang[..., None])
    if m % 2 == 0:
        nyq = m // 2
        basis[..., nyq] = t ** nyq * np.cos(nyq * ang)
    return _out((basis @ coef).real)


def dirichlet_to_neumann(g, boundary) -> np.ndarray:
    """∂_ρ (조화확장) at ρ = r. 모드 k 배율 |k|/r."""
    values = _values(g)
    k = mode_numbers(len(values))
    return np.fft.ifft(np.fft.fft(values) * np.abs(k)).real / boundary.geometry.radius


def poisson_ring_circulants(interior) -> np.ndarray:
    """링 i 마다 (ρ_i/r)^{|k|} 배율의 순환행렬. (nr, M, M)"""
    m = interior.angular_count
    k = np.abs(mode_numbers(m))
    t = interior.rho / interior.geometry.radius
    return np.stack([circulant(np.fft.ifft(ti ** k).real) for ti in t])


def poisson_large(x, g, a, boundary):
    """큰 a-조화 확장 P_a g. 트레이스 u/(r²−|x−θ|²)^{a−1} → g.

    경계 구적 ∫_∂B (r²−|x−θ|²)^a g(z) / (2πr|x−z|²) dσ_z 와 같은 값이다. 핵이
    gap^{a−1} × 고전 푸아송 핵으로 갈라지므로 조화 확장을 삼각 보간으로 구한 뒤 gap^{a−1} 를 곱한다.
    """
    a = as_order(a)
    geometry = boundary.geometry
    x = np.asarray(x, dtype=float)
    gx = geometry.gap(x)
    if np.any(gx <= 0):
        raise InvalidParameterError("poisson_large: x 는 원판 내부에 있어야 한다")
    return _out(gx ** (a - 1.0) * harmonic_extension(g, x, boundary))


def exterior_source_field(f, x, a, patch):
    a = as_order(a)
    geometry = patch.geometry
    x = np.asarray(x, dtype=float)
    if np.any(geometry.gap(x) < 0):
        raise InvalidParameterError("exterior_source_field: x 는 원판 안에 있어야 한다")
    k = kernel_constants(a, geometry.n)
    fw = _values(f) * patch.weights
    pts = np.atleast_2d(x)
    d2 = np.sum((pts[:, None, :] - patch.nodes[None, :, :]) ** 2, axis=-1)
    val = k.frac_constant * (d2 ** (-(geometry.n + 2.0 * a) / 2.0) @ fw)
    return _out(val[0] if x.ndim == 1 else val.reshape(x.shape[:-1]))


# =============================================================================
# 점검 표
# =============================================================================

KERNEL_TABLE_HEADER = ["x1", "x2", "z1", "z2", "G", "R0"]


def kernel_table(grids, a, sample_size: int = 64) -> list[list[float]]:
    """내부 노드 표본 쌍 (i ≠ j) 의 G, R₀ 표."""
    nodes = grids.interior.nodes
    stride = max(1, len(nodes) // max(1, sample_size))
    pts = nodes[::stride][:sample_size]
    rows = []
    for i, x in enumerate(pts):
        z = np.delete(pts, i, axis=0)
        G = np.atleast_1d(green_disk(x, z, a, grids.geometry))
        R = np.atleast_1d(r0(x, z, grids.geometry))
        rows.extend([x[0], x[1], zj[0], zj[1], gj, rj] for zj, gj, rj in zip(z, G, R))
    return rows
