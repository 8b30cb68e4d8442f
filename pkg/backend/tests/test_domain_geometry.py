"""
격자 · 기하 테스트
==================
구적 가중의 면적·모멘트, 경계 호 마스크, 외부 패치 분리 조건.

실행: cd backend && python -m pytest tests -q
"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core.errors import InvalidParameterError  # noqa: E402
from app.services.domain_geometry import (FULL_CIRCLE, DiskGeometry, FractionalOrder,  # noqa: E402
                                          build_disk_grids, build_exterior_patch,
                                          build_lab_grids, grid_rows, sigma_mask)

_UNIT = DiskGeometry()


@pytest.mark.parametrize("a", [0.0, 1.0, -0.2, 1.5, float("nan")])
def test_fractional_order_rejects_out_of_range(a):
    with pytest.raises(InvalidParameterError):
        FractionalOrder(a)


def test_unit_disk_area_and_odd_moment():
    interior, boundary = build_disk_grids(_UNIT, 16, 32)
    assert np.all(interior.weights > 0)
    assert interior.weights.sum() == pytest.approx(math.pi, rel=1e-10)
    assert abs(interior.integrate(interior.nodes[:, 0])) < 1e-12
    assert boundary.arc_weights.sum() == pytest.approx(2 * math.pi, rel=1e-12)


def test_nodes_strictly_inside():
    interior, _ = build_disk_grids(_UNIT, 16, 32)
    rho = np.hypot(*interior.nodes.T)
    assert np.all(rho < 1.0)
    assert np.all(interior.dist > 0)
    assert np.allclose(interior.gap, 1.0 - rho ** 2, atol=1e-14)


def test_node_ordering_is_ring_major():
    interior, _ = build_disk_grids(_UNIT, 8, 16)
    i, l = 3, 5
    x = interior.nodes[i * 16 + l]
    assert np.hypot(*x) == pytest.approx(interior.rho[i], abs=1e-14)
    assert math.atan2(x[1], x[0]) % (2 * math.pi) == pytest.approx(interior.phi[l], abs=1e-12)


def test_inverse_square_root_weight_integral():
    """∫ (1−|x|²)^{−1/2} = 2π"""
    interior, _ = build_disk_grids(_UNIT, 32, 64)
    assert interior.integrate(interior.gap ** -0.5) == pytest.approx(2 * math.pi, rel=1e-2)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
def test_weighted_integrals_match_closed_forms(a):
    """격자 차수 = a 이면 gap^a, gap^{a−1} 적분이 스펙트럴 정확도"""
    interior, _ = build_disk_grids(_UNIT, 16, 32, order=a)
    assert interior.integrate(interior.gap ** a) == pytest.approx(math.pi / (a + 1), rel=1e-9)
    assert interior.integrate(interior.gap ** (a - 1)) == pytest.approx(math.pi / a, rel=1e-9)


def test_radius_and_center_scaling():
    geo = DiskGeometry(center=(0.5, -1.0), radius=2.0)
    interior, boundary = build_disk_grids(geo, 12, 24)
    assert interior.weights.sum() == pytest.approx(4 * math.pi, rel=1e-10)
    assert boundary.arc_weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    assert np.allclose(np.hypot(*geo.relative(boundary.nodes).T), 2.0)


def test_refinement_ladder_converges():
    """매끄러운 피적분함수 exp(x₁) 의 구적 오차가 반경 수 {8,16,32} 에서 줄어든다"""
    exact = math.pi * 2 * 0.5651591039924851   # 2π I₁(1)
    errors = []
    for nr in (8, 16, 32):
        interior, _ = build_disk_grids(_UNIT, nr, 64)
        errors.append(abs(interior.integrate(np.exp(interior.nodes[:, 0])) - exact))
    assert errors[1] <= 1.1 * errors[0] + 1e-14
    assert errors[2] <= 1.1 * errors[1] + 1e-14
    assert errors[2] < 1e-10


@pytest.mark.parametrize("counts", [(3, 32), (16, 7)])
def test_rejects_small_counts(counts):
    with pytest.raises(InvalidParameterError):
        build_disk_grids(_UNIT, *counts)


def test_sigma_mask_half_and_full():
    angles = 2 * math.pi * np.arange(32) / 32
    assert sigma_mask(angles, (0.0, math.pi)).sum() == 16
    assert sigma_mask(angles, FULL_CIRCLE).all()
    # 0 을 가로지르는 호
    wrap = sigma_mask(angles, (1.5 * math.pi + 0.01, 2.5 * math.pi + 0.01))
    assert wrap[0] and wrap.sum() == 16


def test_empty_sigma_rejected():
    with pytest.raises(InvalidParameterError):
        build_disk_grids(_UNIT, 8, 16, sigma=(0.01, 0.02))


def test_sigma_sums_never_exceed_full():
    _, boundary = build_disk_grids(_UNIT, 8, 32, sigma=(0.2, 2.0))
    values = 1.0 + np.cos(boundary.angles) ** 2
    assert boundary.integrate(values, on_sigma=True) <= boundary.integrate(values)


def test_exterior_patch_area_and_separation():
    patch = build_exterior_patch(_UNIT, 1.5, 2.0, (8, 32))
    assert patch.separation == pytest.approx(0.5)
    assert patch.weights.sum() == pytest.approx(math.pi * (4.0 - 2.25), rel=1e-12)
    assert np.all(np.hypot(*patch.nodes.T) > 1.0 + patch.separation)


@pytest.mark.parametrize("inner,outer", [(1.0, 2.0), (0.8, 2.0), (1.6, 1.5)])
def test_exterior_patch_rejects_overlap(inner, outer):
    with pytest.raises(InvalidParameterError):
        build_exterior_patch(_UNIT, inner, outer)


def test_lab_grids_refine_and_resigma():
    grids = build_lab_grids(0.5, 16, 32)
    fine = grids.refined(1.5)
    assert (fine.interior.radial_count, fine.interior.angular_count) == (24, 48)
    assert fine.boundary.sigma == grids.boundary.sigma
    full = grids.with_sigma(FULL_CIRCLE)
    assert full.boundary.sigma_count == 32
    assert np.array_equal(full.interior.nodes, grids.interior.nodes)
    assert grids.with_order(0.3).order == pytest.approx(0.3)


def test_grid_rows_columns():
    grids = build_lab_grids(0.5, 8, 16)
    rows = grid_rows(grids.interior)
    assert len(rows) == grids.interior.size
    assert all(len(r) == 4 for r in rows)
    assert len(grid_rows(grids.patch)) == grids.patch.size
