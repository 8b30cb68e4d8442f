"""
항등식 실험실 테스트
====================
부분적분 · 핵심 항등식 · 국소 특성화 · 반례 구성 · 경계 UCP · 치역 조밀성 · 묶음 실행.

실행: cd backend && python -m pytest tests -q
"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core.errors import DegenerateProjectionError, InvalidParameterError  # noqa: E402
from app.services.domain_geometry import FULL_CIRCLE, build_lab_grids  # noqa: E402
from app.services.forward_solver import (BoundaryDatum, Potential, SourceFunction,  # noqa: E402
                                         bump_potential, fourier_datum)
from app.services.identity_lab import (SUITE_CHECKS, IdentityReport, boundary_ucp_probe,  # noqa: E402
                                       check_gov_difference, check_gov_identity, check_ibp_identity,
                                       check_local_characterization, counterexample_constructor,
                                       range_density_probe, run_suite)
from app.services.kernels import poisson_large  # noqa: E402
from app.services.response_map import assemble_response, default_source_basis  # noqa: E402

_GRIDS = build_lab_grids(0.5, 16, 32)


def _datum(grids):
    return BoundaryDatum.from_function(grids.boundary, lambda t: 0.5 + np.cos(t))


def _source(grids):
    return default_source_basis(grids.patch)[1]


def _potential(kind, grids):
    if kind == "zero":
        return Potential.zero(grids.interior)
    return bump_potential(grids.interior)


def test_report_from_sides():
    r = IdentityReport.from_sides("x", 1.0, 1.01, _GRIDS)
    assert r.relative_residual == pytest.approx(0.01 / 1.01)
    assert r.passed
    assert r.summary() == (1.0, 1.01, r.relative_residual)
    assert IdentityReport.from_sides("x", 0.0, 0.0, _GRIDS).relative_residual == 0.0
    assert not IdentityReport.from_sides("x", 1.0, -1.0, _GRIDS).passed


# =============================================================================
# 부분적분 / 핵심 항등식
# =============================================================================

@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("kind", ["zero", "bump"])
def test_ibp_identity(a, kind):
    grids = _GRIDS.with_order(a)
    report = check_ibp_identity(_potential(kind, grids), _datum(grids), _source(grids), grids)
    assert report.passed
    assert report.relative_residual <= 2e-2
    assert len(report.refinement_trend) == 2
    assert report.refinement_trend[1] <= max(report.refinement_trend[0], 1e-10)
    gam = math.gamma(a) * math.gamma(a + 1)
    assert report.details["fitted_constant"] == pytest.approx(gam, rel=2e-2)


def test_ibp_fitted_constant_at_half():
    report = check_ibp_identity(bump_potential(_GRIDS.interior), _datum(_GRIDS), _source(_GRIDS),
                                _GRIDS, refine=False)
    assert report.details["fitted_constant"] == pytest.approx(math.pi / 2, rel=2e-2)


def test_ibp_zero_datum_both_sides_zero():
    b = _GRIDS.boundary
    g = BoundaryDatum.on_grid(b, np.zeros(b.size))
    report = check_ibp_identity(bump_potential(_GRIDS.interior), g, _source(_GRIDS), _GRIDS,
                                refine=False)
    assert report.lhs == 0.0 and report.rhs == 0.0
    assert report.passed


@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("kind", ["zero", "bump"])
def test_gov_identity(a, kind):
    grids = _GRIDS.with_order(a)
    report = check_gov_identity(_potential(kind, grids), _datum(grids), _source(grids), grids)
    assert report.relative_residual <= 2e-2
    assert report.refinement_trend[1] <= max(report.refinement_trend[0], 1e-10)
    assert report.details["fitted_constant"] == pytest.approx(math.gamma(a) * math.gamma(a + 1),
                                                              rel=2e-2)


def test_gov_zero_source():
    f = SourceFunction(np.zeros(_GRIDS.patch.size))
    report = check_gov_identity(bump_potential(_GRIDS.interior), _datum(_GRIDS), f, _GRIDS,
                                refine=False)
    assert report.lhs == 0.0
    assert report.passed


def test_gov_requires_datum_on_sigma():
    full = _GRIDS.with_sigma(FULL_CIRCLE)
    g = BoundaryDatum.on_grid(full.boundary, np.ones(full.boundary.size))
    with pytest.raises(InvalidParameterError):
        check_gov_identity(Potential.zero(_GRIDS.interior), g, _source(_GRIDS), _GRIDS)


def test_gov_difference_is_consistent():
    q1 = bump_potential(_GRIDS.interior)
    q2 = Potential.zero(_GRIDS.interior)
    report = check_gov_difference(q1, q2, _datum(_GRIDS), _source(_GRIDS), _GRIDS)
    assert report.passed
    assert report.details["trace_gap"] > 0


# =============================================================================
# 국소 특성화
# =============================================================================

@pytest.mark.parametrize("mode", [0, 1, 2])
def test_local_characterization_fourier_modes(mode):
    full = _GRIDS.with_sigma(FULL_CIRCLE)
    report = check_local_characterization(fourier_datum(full.boundary, mode), full, seed=7)
    assert report.lhs <= 1e-6
    assert report.passed
    assert report.details["ratio_error"] <= 1e-10
    assert report.details["pv_relative_residual"] <= 1e-2


def test_report_limits_gate_passed():
    held = IdentityReport.from_sides("x", 0.0, 0.0, _GRIDS, limits={"pv_relative_residual": 1e-2},
                                     pv_relative_residual=0.5)
    assert held.relative_residual == 0.0
    assert not held.passed
    assert held.as_dict()["limits"] == {"pv_relative_residual": 1e-2}
    assert IdentityReport.from_sides("x", 0.0, 0.0, _GRIDS, limits={"pv_relative_residual": 1e-2},
                                     pv_relative_residual=1e-3).passed


def test_local_characterization_rejects_non_harmonic_ratio():
    full = _GRIDS.with_sigma(FULL_CIRCLE)
    g = fourier_datum(full.boundary, 1)
    a = full.order

    def perturbed(p):
        # ratio 에 0.1|x|² 가 더해진다: Δ = 0.4
        extra = 0.1 * np.sum(np.asarray(p) ** 2, axis=-1) * full.geometry.gap(p) ** (a - 1.0)
        return poisson_large(p, g, a, full.boundary) + extra

    report = check_local_characterization(g, full, candidate=perturbed, seed=7)
    assert report.lhs == pytest.approx(0.4, rel=1e-3)
    assert report.relative_residual > report.tolerance
    assert report.details["ratio_error"] > 1e-3
    assert not report.passed


# =============================================================================
# 반례
# =============================================================================

def test_counterexample_trace_vanishes():
    ce = counterexample_constructor(0.5, 0.4, 10, _GRIDS, seed=1)
    assert ce.report.details["v_norm"] > 0
    assert ce.ratio <= 1e-3
    assert ce.report.passed
    inside = _GRIDS.interior.node_rho < 0.4
    assert np.all(ce.g[~inside] == 0)


def test_counterexample_ratio_decreases_with_degree():
    ratios = [counterexample_constructor(0.5, 0.4, d, _GRIDS, seed=1).ratio for d in (4, 8, 12)]
    assert ratios[0] > ratios[1] > ratios[2]


def test_counterexample_rejects_harmonic_field():
    z = _GRIDS.interior.nodes[:, 0] + 1j * _GRIDS.interior.nodes[:, 1]
    with pytest.raises(DegenerateProjectionError):
        counterexample_constructor(0.5, 0.4, 10, _GRIDS, field_values=(z ** 2).real)


def test_counterexample_parameter_checks():
    with pytest.raises(InvalidParameterError):
        counterexample_constructor(0.5, 1.2, 10, _GRIDS)
    with pytest.raises(InvalidParameterError):
        counterexample_constructor(0.5, 0.4, 1, _GRIDS)


# =============================================================================
# 경계 UCP · 치역
# =============================================================================

def test_ucp_full_circle_dominates_arc():
    report = boundary_ucp_probe(0.5, (0.0, math.pi), _GRIDS)
    assert report.min_singular > 0
    assert report.full_circle_min >= report.min_singular * (1 - 1e-10)
    assert report.rows == 2 * 16
    assert np.all(report.traces(np.zeros(12)) == 0)
    small = boundary_ucp_probe(0.5, (0.0, math.pi / 2), _GRIDS)
    assert small.min_singular <= report.min_singular * (1 + 1e-10)


def test_range_density_monotone():
    basis = default_source_basis(_GRIDS.patch, count=16)
    resp = assemble_response(bump_potential(_GRIDS.interior), basis, _GRIDS)
    report = range_density_probe(resp)
    assert report.sizes == [2, 4, 8, 16]
    assert report.monotone
    assert report.ranks_at(1e-8)[0] == 2


def test_range_density_needs_columns():
    resp = assemble_response(Potential.zero(_GRIDS.interior), default_source_basis(_GRIDS.patch, 1),
                             _GRIDS)
    with pytest.raises(InvalidParameterError):
        range_density_probe(resp)


# =============================================================================
# 묶음
# =============================================================================

def test_suite_runs_named_checks():
    q = bump_potential(_GRIDS.interior)
    reports = run_suite(_GRIDS, q, _source(_GRIDS), _datum(_GRIDS), checks=["ibp", "local"], seed=3)
    assert [r.check for r in reports] == ["ibp", "local"]
    assert all(r.passed for r in reports)
    with pytest.raises(InvalidParameterError):
        run_suite(_GRIDS, q, _source(_GRIDS), _datum(_GRIDS), checks=["nope"])
    assert "ucp" in SUITE_CHECKS
