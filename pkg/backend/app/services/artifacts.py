"""
실행 산출물 (CSV · 봉인 JSON)
=============================
  · CSV  - 숫자 표. 부동소수는 CSV_DIGITS 유효숫자 고정 → 같은 설정이면 바이트 동일
  · JSON - 구조 보고서. canonical JSON (키 정렬·고정 구분자) 의 sha256 을 "hash" 로 봉인
  · 응답 행렬 쌍 (response.csv + response.json) - respond → invert 교환 형식

봉인된 보고서는 다시 쓰지 않는다. 같은 이름으로 다시 쓰면 덮어쓴다 (실행 디렉터리 단위).
"""
import csv
import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np

from ..core.config import SCHEMA_VERSION, format_float
from ..core.errors import MissingArtifactError
from .response_map import ResponseMatrix

logger = logging.getLogger(__name__)

RESPONSE_CSV = "response.csv"
RESPONSE_JSON = "response.json"


def _plain(obj):
    """numpy 스칼라/배열 → 파이썬, 비유한 부동소수 → 문자열."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def canonical(obj) -> str:
    return json.dumps(_plain(obj), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def seal(payload: dict) -> dict:
    body = dict(_plain(payload), schema_version=SCHEMA_VERSION)
    body.pop("hash", None)
    body["hash"] = hashlib.sha256(canonical(body).encode()).hexdigest()
    return body


def verify_seal(payload: dict) -> bool:
    body = dict(payload)
    digest = body.pop("hash", None)
    return digest == hashlib.sha256(canonical(body).encode()).hexdigest()


def write_report(path, payload: dict) -> dict:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sealed = seal(payload)
    path.write_text(json.dumps(sealed, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return sealed


def read_report(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing data file: {path}", key=str(path))
    return json.loads(path.read_text(encoding="utf-8"))


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing data file: {path}", key=str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MissingArtifactError(f"빈 CSV: {path}", key=str(path))
    return rows[0], rows[1:]


def write_response_pair(directory, response: ResponseMatrix, angles) -> tuple[Path, Path]:
    """행 = Σ 위 경계 각도, 열 = 소스. 메타는 JSON 사이드카."""
    directory = Path(directory)
    header = ["angle"] + [f"source{j}" for j in range(response.shape[1])]
    rows = [[phi, *row] for phi, row in zip(angles, response.entries)]
    csv_path = write_csv(directory / RESPONSE_CSV, header, rows)
    digest = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    json_path = directory / RESPONSE_JSON
    write_report(json_path, {"meta": response.meta, "shape": list(response.shape),
                             "csv_sha256": digest})
    logger.info("[respond] %s, %s 기록", csv_path.name, json_path.name)
    return csv_path, json_path


def read_response_pair(directory) -> tuple[ResponseMatrix, np.ndarray]:
    directory = Path(directory)
    for name in (RESPONSE_CSV, RESPONSE_JSON):
        if not (directory / name).exists():
            raise MissingArtifactError(f"missing data file: {directory / name}", key=name)
    sidecar = read_report(directory / RESPONSE_JSON)
    digest = sidecar.get("csv_sha256")
    if digest and digest != hashlib.sha256((directory / RESPONSE_CSV).read_bytes()).hexdigest():
        raise MissingArtifactError(f"response.csv 가 사이드카 해시와 다르다 ({directory})",
                                   key=RESPONSE_CSV)
    _, rows = read_csv(directory / RESPONSE_CSV)
    table = np.array([[float(v) for v in row] for row in rows], dtype=float)
    entries = table[:, 1:]
    if list(entries.shape) != list(sidecar.get("shape", entries.shape)):
        raise MissingArtifactError(
            f"response.csv 크기 {entries.shape} 가 사이드카 {sidecar.get('shape')} 와 다르다",
            key=RESPONSE_CSV)
    return ResponseMatrix(entries, sidecar.get("meta", {})), table[:, 0]
