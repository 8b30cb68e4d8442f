"""
fraclab 명령행
==============
    fraclab <command> --config <path> [--plot] [--seed N] [--out DIR]

command: forward | respond | invert | verify | counterexample | kernels

종료 코드
  0  성공
  1  수치 실패 (failure.json 보고서는 남긴다)
  2  설정 오류 · 필요한 산출물 없음 ("missing data file")
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .core.config import settings
from .core.errors import ConfigError, FraclabError, NumericalFailure
from .core.log import configure_logging
from .core.ttl_cache import fingerprint
from .models.run_config import RunConfig, config_echo, parse_config
from .services import artifacts, plots
from .services.domain_geometry import GRID_HEADER, build_lab_grids, grid_rows
from .services.forward_solver import (BoundaryDatum, Potential, bump_potential, fourier_datum,
                                      multi_bump_potential, oracle_certificate,
                                      solve_exterior_dirichlet, solve_large_dirichlet)
from .services.identity_lab import counterexample_constructor, run_suite
from .services.inverse_solver import (InversionConfig, reconstruct_gauss_newton,
                                      relative_l2_error, select_regularization, synthesize_data)
from .services.kernels import KERNEL_TABLE_HEADER, kernel_constants, kernel_table
from .services.response_map import (assemble_response, default_source_basis,
                                    response_conditioning)

logger = logging.getLogger(__name__)

COMMANDS = ("forward", "respond", "invert", "verify", "counterexample", "kernels")
ORACLE_TOLERANCE = 2e-2


# =============================================================================
# 설정 → 객체
# =============================================================================

def lab_grids(cfg: RunConfig):
    g = cfg.grid
    return build_lab_grids(cfg.a, g.radial_count, g.angular_count, sigma=cfg.sigma,
                           exterior=(g.exterior_inner, g.exterior_outer),
                           exterior_counts=(g.exterior_radial, g.exterior_angular))


def lab_potential(cfg: RunConfig, interior) -> Potential:
    p = cfg.potential
    if p.kind == "zero":
        return Potential.zero(interior, p.support_radius)
    if p.kind == "bump":
        return bump_potential(interior, p.height, p.width, p.center, p.support_radius)
    return multi_bump_potential(interior, [p.center, p.second_center], p.height, p.width,
                                p.support_radius)


def lab_datum(cfg: RunConfig, boundary) -> BoundaryDatum:
    return fourier_datum(boundary, cfg.forward.datum_mode)


def inversion_config(cfg: RunConfig, seed: int) -> InversionConfig:
    s = cfg.inversion
    return InversionConfig(regularization_weight=s.regularization_weight,
                           max_iterations=s.max_iterations, step_tolerance=s.step_tolerance,
                           noise_level=s.noise_level, seed=seed, inverse_crime=s.inverse_crime)


def _angles_on_sigma(grids) -> np.ndarray:
    return grids.boundary.angles[grids.boundary.sigma_mask]


# =============================================================================
# 명령
# =============================================================================

def run_forward(cfg: RunConfig, out: Path, seed: int, plot: bool) -> int:
    grids = lab_grids(cfg)
    q = lab_potential(cfg, grids.interior)
    if cfg.forward.problem == "exterior":
        basis = default_source_basis(grids.patch, cfg.source.basis_size, cfg.source.width)
        if cfg.forward.source_index >= len(basis):
            raise ConfigError(f"invalid value for 'forward.source_index': 기저 크기 {len(basis)}",
                              key="forward.source_index")
        sol = solve_exterior_dirichlet(q, basis[cfg.forward.source_index], grids)
    else:
        sol = solve_large_dirichlet(q, lab_datum(cfg, grids.boundary), grids)
    nodes = grids.interior.nodes
    artifacts.write_csv(out / "field.csv", ["x1", "x2", "u"],
                        ([x[0], x[1], v] for x, v in zip(nodes, sol.interior_values)))
    artifacts.write_csv(out / "traces.csv", ["angle", "trace_a", "trace_am1", "in_sigma"],
                        zip(grids.boundary.angles, sol.trace_a, sol.trace_am1,
                            grids.boundary.sigma_mask.astype(int)))
    artifacts.write_csv(out / "grid.csv", GRID_HEADER, grid_rows(grids.interior))
    cert = oracle_certificate(sol, q, grids)
    artifacts.write_report(out / "forward.json", {
        "command": "forward", "class": sol.class_tag.value, "residual": sol.residual,
        "condition": sol.condition, "oracle_max_relative": cert.max_relative,
        "oracle_tolerance": ORACLE_TOLERANCE, "grid": grids.spec, "q_hash": q.digest,
    })
    if plot:
        plots.plot_traces(out / "traces.svg", grids.boundary.angles,
                          {"u/d^a": sol.trace_a, "u/d^(a-1)": sol.trace_am1})
    if cert.max_relative > ORACLE_TOLERANCE:
        logger.error("[cli] 오라클 잔차 %.3e > %.0e", cert.max_relative, ORACLE_TOLERANCE)
        return 1
    return 0


def run_respond(cfg: RunConfig, out: Path, seed: int, plot: bool) -> int:
    grids = lab_grids(cfg)
    q = lab_potential(cfg, grids.interior)
    basis = default_source_basis(grids.patch, cfg.source.basis_size, cfg.source.width)
    data = synthesize_data(q, basis, cfg.inversion.noise_level, seed, grids,
                           inverse_crime=cfg.inversion.inverse_crime)
    artifacts.write_response_pair(out, data, _angles_on_sigma(grids))
    report = response_conditioning(data)
    artifacts.write_report(out / "conditioning.json", report.as_dict())
    if plot:
        plots.plot_singular_values(out / "singular_values.svg", report.singular_values)
        plots.plot_traces(out / "response.svg", _angles_on_sigma(grids),
                          {f"source{j}": data.entries[:, j] for j in range(data.shape[1])})
    return 0


def run_invert(cfg: RunConfig, out: Path, seed: int, plot: bool) -> int:
    data, _ = artifacts.read_response_pair(out)
    grids = lab_grids(cfg)
    basis = default_source_basis(grids.patch, cfg.source.basis_size, cfg.source.width)
    config = inversion_config(cfg, seed)
    q_true = lab_potential(cfg, grids.interior)
    has_truth = cfg.potential.kind != "zero"
    noise = float(data.meta.get("noise_level", config.noise_level))
    if noise > 0:
        result = select_regularization(data, basis, config.replace(noise_level=noise), grids,
                                       q_true=q_true if has_truth else None)
    else:
        result = reconstruct_gauss_newton(data, basis, config, grids,
                                          q_true=q_true if has_truth else None)
    q_hat = result.q_estimate
    nodes = grids.interior.nodes
    artifacts.write_csv(out / "q_estimate.csv", ["x1", "x2", "q"],
                        ([x[0], x[1], v] for x, v in zip(nodes, q_hat.values)))
    artifacts.write_csv(out / "history.csv", ["iteration", "objective"],
                        enumerate(result.residual_history))
    summary = result.as_dict()
    summary.update(command="invert", max_abs_estimate=float(np.max(np.abs(q_hat.values))),
                   data_hash=fingerprint(data.entries.tolist()))
    if has_truth:
        summary["relative_error"] = relative_l2_error(q_hat, q_true, grids.interior)
    artifacts.write_report(out / "inversion.json", summary)
    if plot:
        plots.plot_potential(out / "q_estimate.svg", nodes, q_hat.values, "q estimate")
    return 0


def run_verify(cfg: RunConfig, out: Path, seed: int, plot: bool) -> int:
    grids = lab_grids(cfg)
    q = lab_potential(cfg, grids.interior)
    basis = default_source_basis(grids.patch, max(cfg.source.basis_size, 16), cfg.source.width)
    g = BoundaryDatum.from_function(grids.boundary, lambda t: 0.5 + np.cos(t))
    response = None
    if "all" in cfg.checks or "range" in cfg.checks:
        response = assemble_response(q, basis, grids)
    reports = run_suite(grids, q, basis[0], g, response=response, checks=cfg.checks, seed=seed,
                        omega_radius=cfg.counterexample.omega_radius,
                        degree=cfg.counterexample.degree)
    label = f"{grids.interior.radial_count}x{grids.interior.angular_count}"
    rows = []
    for rep in reports:
        name = rep.as_dict()["check"]
        lhs, rhs, res = rep.summary()
        rows.append([name, lhs, rhs, res, label, int(rep.passed)])
        artifacts.write_report(out / f"verify_{name}.json", rep.as_dict())
    artifacts.write_csv(out / "verify.csv", ["check", "lhs", "rhs", "residual", "grid", "passed"], rows)
    failed = [r[0] for r in rows if not r[5]]
    if failed:
        logger.error("[cli] 실패한 점검: %s", ", ".join(failed))
        return 1
    return 0


def run_counterexample(cfg: RunConfig, out: Path, seed: int, plot: bool) -> int:
    grids = lab_grids(cfg)
    ce = counterexample_constructor(cfg.a, cfg.counterexample.omega_radius,
                                    cfg.counterexample.degree, grids, seed=seed)
    nodes = grids.interior.nodes
    artifacts.write_csv(out / "counterexample.csv", ["x1", "x2", "g", "v"],
                        ([x[0], x[1], gi, vi] for x, gi, vi in zip(nodes, ce.g, ce.v)))
    artifacts.write_csv(out / "counterexample_trace.csv", ["angle", "trace_a"],
                        zip(grids.boundary.angles, ce.trace))
    artifacts.write_report(out / "counterexample.json", ce.report.as_dict())
    if plot:
        plots.plot_potential(out / "counterexample.svg", nodes, ce.v, "v = G[g]")
    return 0 if ce.report.passed else 1


def run_kernels(cfg: RunConfig, out: Path, seed: int, plot: bool) -> int:
    grids = lab_grids(cfg)
    artifacts.write_csv(out / "kernels.csv", KERNEL_TABLE_HEADER,
                        kernel_table(grids, cfg.a, cfg.kernels.sample_size))
    k = kernel_constants(cfg.a)
    artifacts.write_report(out / "kernels.json", {
        "a": k.a, "kappa_n": k.kappa_n, "c_tilde": k.c_tilde, "frac_constant": k.frac_constant,
        "gamma_factor": k.gamma_factor, "green_constant": k.green_constant,
        "green_scale": k.green_scale, "torsion_eigenvalue": k.torsion_eigenvalue,
    })
    return 0


RUNNERS = {
    "forward": run_forward, "respond": run_respond, "invert": run_invert,
    "verify": run_verify, "counterexample": run_counterexample, "kernels": run_kernels,
}


def dispatch(command: str, config: RunConfig, *, out: Path | None = None, seed: int | None = None,
             plot: bool = False) -> int:
    if command not in RUNNERS:
        raise ConfigError(f"unknown command '{command}'", key="command")
    out = Path(out or config.output_dir or settings.OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    seed = seed if seed is not None else (config.inversion.seed if config.inversion.seed is not None
                                          else settings.DEFAULT_SEED)
    resolved = config.model_copy(update={
        "output_dir": str(out),
        "inversion": config.inversion.model_copy(update={"seed": seed}),
    })
    (out / "config.json").write_text(config_echo(resolved), encoding="utf-8")
    logger.info("[cli] %s → %s (seed=%d)", command, out, seed)
    try:
        return RUNNERS[command](resolved, out, seed, plot)
    except NumericalFailure as exc:
        artifacts.write_report(out / "failure.json", {
            "command": command, "error": type(exc).__name__, "message": str(exc),
            "history": getattr(exc, "history", None),
        })
        logger.error("[cli] 수치 실패: %s", exc)
        return exc.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraclab",
                                description="분수 슈뢰딩거 방정식 수치 실험실 (원판)")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=str, default=None, help="JSON 설정 파일 (없으면 기본값)")
    p.add_argument("--plot", action="store_true", help="SVG 그림도 쓴다")
    p.add_argument("--seed", type=int, default=None, help="의사난수 시드")
    p.add_argument("--out", type=str, default=None, help="실행 산출물 디렉터리")
    p.add_argument("--log-level", type=str, default=None, dest="log_level")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        if args.config is not None:
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"missing config file: {path}", key="--config")
            text = path.read_text(encoding="utf-8")
        else:
            text = "{}"
        cfg = parse_config(text)
        return dispatch(args.command, cfg, out=args.out and Path(args.out), seed=args.seed,
                        plot=args.plot)
    except FraclabError as exc:
        print(f"fraclab: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
