"""
명령행 테스트
=============
설정 파싱 · 종료 코드 · respond → invert 왕복 · 같은 시드 재실행의 바이트 동일성.

실행: cd backend && python -m pytest tests -q
"""
import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.cli import main  # noqa: E402
from app.core.errors import ConfigError  # noqa: E402
from app.models.run_config import RunConfig, config_echo, parse_config  # noqa: E402
from app.services import artifacts  # noqa: E402
from app.services.identity_lab import SUITE_CHECKS  # noqa: E402


def _config(tmp_path, doc: dict, name="lab.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _run(tmp_path, command, doc=None, out="run", *extra):
    argv = [command, "--out", str(tmp_path / out)]
    if doc is not None:
        argv += ["--config", _config(tmp_path, doc, f"{out}.json")]
    return main(argv + list(extra))


# =============================================================================
# 설정
# =============================================================================

def test_defaults():
    cfg = parse_config("")
    assert cfg.a == 0.5
    assert cfg.grid.radial_count == 16 and cfg.grid.angular_count == 32
    assert cfg.checks == ["all"]
    assert parse_config(config_echo(cfg)) == cfg


@pytest.mark.parametrize("doc, key", [
    ({"a": 1.5}, "a"),
    ({"a": 0.0}, "a"),
    ({"grid": {"radial_count": 2}}, "grid.radial_count"),
    ({"sigma": [1.0, 0.5]}, "sigma"),
    ({"sigma": [0.01, 0.02]}, "sigma"),
    ({"potential": {"center": [0.5, 0.0], "support_radius": 0.6}}, "potential.support_radius"),
    ({"grid": {"exterior_inner": 1.8, "exterior_outer": 1.6}}, "grid.exterior_outer"),
])
def test_invalid_values_name_the_key(doc, key):
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(doc))
    assert info.value.key == key
    assert key in str(info.value)


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown key 'aa'"):
        parse_config('{"aa": 1}')


def test_malformed_document():
    with pytest.raises(ConfigError, match="malformed config"):
        parse_config("{")
    with pytest.raises(ConfigError, match="malformed config"):
        parse_config("[1, 2]")


def test_bump_must_fit_support():
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"potential": {"center": [0.5, 0.0], "support_radius": 0.6}}))


# =============================================================================
# 명령
# =============================================================================

def test_kernels_command(tmp_path):
    assert _run(tmp_path, "kernels", {"kernels": {"sample_size": 8}}) == 0
    out = tmp_path / "run"
    header, rows = artifacts.read_csv(out / "kernels.csv")
    assert len(rows) == 8 * 7
    echoed = RunConfig.model_validate_json((out / "config.json").read_text(encoding="utf-8"))
    assert echoed.kernels.sample_size == 8
    assert echoed.output_dir == str(out)
    assert artifacts.verify_seal(artifacts.read_report(out / "kernels.json"))


def test_missing_config_file(tmp_path, capsys):
    code = main(["kernels", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
    assert code == 2
    assert "missing config file" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "kernels", {"a": 1.5}) == 2
    assert "'a'" in capsys.readouterr().err


def test_invert_without_data(tmp_path, capsys):
    assert _run(tmp_path, "invert") == 2
    assert "missing data file" in capsys.readouterr().err


def test_zero_potential_round_trip(tmp_path):
    doc = {"potential": {"kind": "zero"}, "inversion": {"noise_level": 0.0, "inverse_crime": True}}
    assert _run(tmp_path, "respond", doc) == 0
    assert _run(tmp_path, "invert", doc) == 0
    report = artifacts.read_report(tmp_path / "run" / "inversion.json")
    assert report["iterations"] == 0
    assert report["max_abs_estimate"] == 0.0
    _, rows = artifacts.read_csv(tmp_path / "run" / "q_estimate.csv")
    assert all(float(r[2]) == 0.0 for r in rows)


def test_respond_writes_conditioning(tmp_path):
    doc = {"inversion": {"noise_level": 0.0, "inverse_crime": True}}
    assert _run(tmp_path, "respond", doc) == 0
    report = artifacts.read_report(tmp_path / "run" / "conditioning.json")
    assert len(report["singular_values"]) == 8


def test_plot_flag_writes_figures(tmp_path):
    doc = {"potential": {"kind": "zero"}, "inversion": {"noise_level": 0.0, "inverse_crime": True}}
    assert _run(tmp_path, "respond", doc, "run", "--plot") == 0
    assert _run(tmp_path, "counterexample", None, "run", "--plot") == 0
    for name in ("singular_values.svg", "response.svg", "counterexample.svg"):
        assert (tmp_path / "run" / name).stat().st_size > 0


def test_forward_command(tmp_path):
    assert _run(tmp_path, "forward", {"potential": {"kind": "zero"}}) == 0
    report = artifacts.read_report(tmp_path / "run" / "forward.json")
    assert report["class"] == "a-class"
    assert report["oracle_max_relative"] <= report["oracle_tolerance"]


def test_forward_rejects_source_index(tmp_path):
    assert _run(tmp_path, "forward", {"forward": {"source_index": 99}}) == 2


def test_verify_default_suite(tmp_path):
    assert _run(tmp_path, "verify") == 0
    _, rows = artifacts.read_csv(tmp_path / "run" / "verify.csv")
    assert [r[0] for r in rows] == list(SUITE_CHECKS)
    assert all(r[5] == "1" for r in rows)


def test_verify_is_byte_reproducible(tmp_path):
    doc = {"checks": ["ibp", "local"]}
    assert _run(tmp_path, "verify", doc, "one") == 0
    assert _run(tmp_path, "verify", doc, "two") == 0
    one = (tmp_path / "one" / "verify.csv").read_bytes()
    assert one == (tmp_path / "two" / "verify.csv").read_bytes()


def test_counterexample_is_byte_reproducible(tmp_path):
    assert _run(tmp_path, "counterexample", None, "one", "--seed", "5") == 0
    assert _run(tmp_path, "counterexample", None, "two", "--seed", "5") == 0
    for name in ("counterexample.csv", "counterexample_trace.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_unknown_command_exits():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
