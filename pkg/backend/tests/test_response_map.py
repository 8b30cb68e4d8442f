"""
응답 행렬 테스트
================
소스 기저 · A_q^Σ 조립 · 선형성 · Σ 제한 일관성 · 조건수 보고.

실행: cd backend && python -m pytest tests -q
"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core.errors import InvalidParameterError  # noqa: E402
from app.services.domain_geometry import FULL_CIRCLE, HALF_CIRCLE, build_lab_grids  # noqa: E402
from app.services.forward_solver import Potential, bump_potential  # noqa: E402
from app.services.response_map import (SourceBasis, assemble_response, boundedness_bound,  # noqa: E402
                                       default_source_basis, nested_columns, radial_spacing,
                                       response_conditioning, restrict_response)

_GRIDS = build_lab_grids(0.5, 16, 32)
_BASIS = default_source_basis(_GRIDS.patch)


def _zero():
    return Potential.zero(_GRIDS.interior)


def test_source_bumps_vanish_near_patch_edges():
    patch = _GRIDS.patch
    spacing = radial_spacing(patch)
    rho = np.hypot(*patch.nodes.T)
    edge = (rho - patch.inner_radius < spacing) | (patch.outer_radius - rho < spacing)
    for f in _BASIS:
        assert np.all(f.values >= 0)
        assert np.max(np.abs(f.values[edge])) < 1e-14
        assert f.values.max() > 0


def test_basis_rejects_wide_bumps():
    with pytest.raises(InvalidParameterError):
        default_source_basis(_GRIDS.patch, width=0.4)
    with pytest.raises(InvalidParameterError):
        default_source_basis(_GRIDS.patch, count=0)


def test_response_shape_and_meta():
    resp = assemble_response(_zero(), _BASIS, _GRIDS)
    assert resp.shape == (_GRIDS.boundary.sigma_count, len(_BASIS))
    assert resp.meta["a"] == pytest.approx(0.5)
    assert resp.meta["sigma"] == list(HALF_CIRCLE)
    assert resp.meta["basis"]["size"] == 8


def test_empty_sigma_is_rejected():
    with pytest.raises(InvalidParameterError):
        assemble_response(_zero(), _BASIS, _GRIDS, sigma=(0.01, 0.02))


def test_zero_potential_columns_positive():
    resp = assemble_response(_zero(), _BASIS, _GRIDS, sigma=FULL_CIRCLE)
    for col in resp.entries.T:
        assert col.min() >= -1e-6 * col.max()
        assert col.mean() > 0


def test_linear_in_source():
    f = _BASIS[2]
    doubled = SourceBasis([f, 2.0 * f], _BASIS.centers[[2, 2]], _BASIS.width)
    resp = assemble_response(bump_potential(_GRIDS.interior), doubled, _GRIDS)
    np.testing.assert_allclose(resp.entries[:, 1], 2 * resp.entries[:, 0], rtol=1e-13, atol=0)


def test_restriction_is_row_subset():
    q = bump_potential(_GRIDS.interior)
    full_grids = _GRIDS.with_sigma(FULL_CIRCLE)
    full = assemble_response(q, _BASIS, full_grids)
    half = assemble_response(q, _BASIS, _GRIDS)
    restricted, narrow = restrict_response(full, full_grids, HALF_CIRCLE)
    np.testing.assert_array_equal(restricted.entries, half.entries)
    assert narrow.boundary.sigma == HALF_CIRCLE
    np.testing.assert_array_equal(full.entries[_GRIDS.boundary.sigma_mask], half.entries)


def test_restriction_must_shrink():
    half = assemble_response(_zero(), _BASIS, _GRIDS)
    with pytest.raises(InvalidParameterError):
        restrict_response(half, _GRIDS, (math.pi / 2, 3 * math.pi / 2))


def test_boundedness_for_zero_potential():
    resp = assemble_response(_zero(), _BASIS, _GRIDS, sigma=FULL_CIRCLE)
    for j, f in enumerate(_BASIS):
        assert np.max(np.abs(resp.entries[:, j])) <= boundedness_bound(f, _GRIDS)


def test_single_source_has_rank_one():
    resp = assemble_response(_zero(), _BASIS.subset([0]), _GRIDS)
    report = response_conditioning(resp)
    assert report.ranks == {1e-8: 1, 1e-12: 1}


def test_nested_ranks_do_not_decrease():
    basis = default_source_basis(_GRIDS.patch, count=16)
    resp = assemble_response(bump_potential(_GRIDS.interior), basis, _GRIDS)
    subsets = nested_columns(resp)
    assert [s.shape[1] for s in subsets] == [2, 4, 8, 16]
    reference = response_conditioning(subsets[-1]).singular_values[0]
    ranks = [response_conditioning(s, reference).ranks[1e-8] for s in subsets]
    assert ranks == sorted(ranks)
    report = response_conditioning(resp)
    assert report.singular_values[-1] > 0
    assert report.decay_rate < 0
    assert set(report.as_dict()["ranks"]) == {"1e-08", "1e-12"}
