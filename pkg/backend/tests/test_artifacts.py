"""
산출물 테스트
=============
봉인 JSON · 고정 자릿수 CSV · 응답 행렬 쌍 교환 형식.

실행: cd backend && python -m pytest tests -q
"""
import json
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core.config import format_float  # noqa: E402
from app.core.errors import MissingArtifactError  # noqa: E402
from app.services import artifacts  # noqa: E402
from app.services.response_map import ResponseMatrix  # noqa: E402


def _response(seed=0):
    rng = np.random.default_rng(seed)
    return ResponseMatrix(rng.normal(size=(6, 3)) * 10.0 ** rng.integers(-8, 3, (6, 3)),
                          {"a": 0.5, "noise_level": 0.0, "sigma": [0.0, math.pi]})


def test_format_float_normalizes_negative_zero():
    assert format_float(-0.0) == "0"
    assert format_float(0.1) == format(0.1, ".17g")
    assert float(format_float(1 / 3)) == 1 / 3


def test_seal_round_trip(tmp_path):
    payload = {"check": "ibp", "lhs": np.float64(1.5), "sizes": np.arange(3), "bad": math.inf}
    sealed = artifacts.write_report(tmp_path / "r.json", payload)
    assert sealed["bad"] == "inf"
    assert sealed["sizes"] == [0, 1, 2]
    loaded = artifacts.read_report(tmp_path / "r.json")
    assert loaded == sealed
    assert artifacts.verify_seal(loaded)


def test_seal_detects_tampering(tmp_path):
    artifacts.write_report(tmp_path / "r.json", {"lhs": 1.0, "rhs": 1.0})
    doc = json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))
    doc["rhs"] = 2.0
    assert not artifacts.verify_seal(doc)


def test_seal_is_key_order_independent():
    assert artifacts.seal({"a": 1, "b": 2})["hash"] == artifacts.seal({"b": 2, "a": 1})["hash"]


def test_missing_report(tmp_path):
    with pytest.raises(MissingArtifactError, match="missing data file"):
        artifacts.read_report(tmp_path / "nope.json")
    with pytest.raises(MissingArtifactError):
        artifacts.read_csv(tmp_path / "nope.csv")


def test_csv_cells(tmp_path):
    path = artifacts.write_csv(tmp_path / "t.csv", ["name", "n", "flag", "x"],
                               [["ibp", np.int64(3), True, -0.0]])
    assert path.read_text(encoding="utf-8") == "name,n,flag,x\nibp,3,true,0\n"
    header, rows = artifacts.read_csv(path)
    assert header == ["name", "n", "flag", "x"]
    assert rows == [["ibp", "3", "true", "0"]]


def test_response_pair_round_trip_is_exact(tmp_path):
    resp = _response()
    angles = np.linspace(0.0, math.pi, 6, endpoint=False)
    artifacts.write_response_pair(tmp_path, resp, angles)
    back, back_angles = artifacts.read_response_pair(tmp_path)
    np.testing.assert_array_equal(back.entries, resp.entries)
    np.testing.assert_array_equal(back_angles, angles)
    assert back.meta["a"] == 0.5


def test_response_pair_rewrites_byte_identical(tmp_path):
    resp = _response(3)
    angles = np.arange(6) * 0.1
    artifacts.write_response_pair(tmp_path / "one", resp, angles)
    artifacts.write_response_pair(tmp_path / "two", resp, angles)
    for name in (artifacts.RESPONSE_CSV, artifacts.RESPONSE_JSON):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_response_pair_missing_sidecar(tmp_path):
    artifacts.write_response_pair(tmp_path, _response(), np.arange(6) * 0.1)
    (tmp_path / artifacts.RESPONSE_JSON).unlink()
    with pytest.raises(MissingArtifactError, match="missing data file"):
        artifacts.read_response_pair(tmp_path)


def test_response_pair_detects_edited_csv(tmp_path):
    artifacts.write_response_pair(tmp_path, _response(), np.arange(6) * 0.1)
    path = tmp_path / artifacts.RESPONSE_CSV
    path.write_text(path.read_text(encoding="utf-8") + "9,9,9,9\n", encoding="utf-8")
    with pytest.raises(MissingArtifactError):
        artifacts.read_response_pair(tmp_path)
