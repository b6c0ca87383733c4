"""Batch front-end: one command per experiment, each writing records.tsv,
summary.json and, where there is something to plot, plot.dat."""
import json
import logging
import math
from logging.config import fileConfig
from pathlib import Path
from typing import Any, Optional

import click
import numpy as np
import pandas as pd

from heisenberg_psido import __version__, config
from heisenberg_psido.container import write_grid_function
from heisenberg_psido.decorators import exit_on_error, run_options
from heisenberg_psido.exceptions import ConfigurationException, VerdictFailure
from heisenberg_psido.heisenberg import random_gaussians
from heisenberg_psido.phase_space import make_grid
from heisenberg_psido.quantize import (
    adjoint_probe,
    apply_report,
    apply_weyl_form_report,
    boundedness_probe,
    calibrate_inversion,
    fourier_slices,
    parametrix_residual,
    subelliptic_probe,
)
from heisenberg_psido.representations import calibrate_plancherel, hs_profile, plancherel_error
from heisenberg_psido.schemas import RunConfig
from heisenberg_psido.symbol_calculus import identity_table, membership, parametrix_leading
from heisenberg_psido.utils import (
    build_lambda_grid,
    build_quant_config,
    build_samples,
    build_symbol,
    group_box,
    load_run_config,
    parse_symbol,
    parse_tolerance,
    save_calibration,
)

logger = logging.getLogger(__name__)


def setup_logging(verbose: bool = False):
    if Path(config.LOG_CONFIG).exists():
        fileConfig(config.LOG_CONFIG, disable_existing_loggers=False)
    else:
        logging.basicConfig(format="%(levelname)-5.5s [%(name)s] %(message)s")
    if verbose:
        logging.getLogger("heisenberg_psido").setLevel(logging.DEBUG)


def resolve_config(
    config_path: Optional[str],
    out_dir: Optional[str],
    symbol_spec: Optional[str],
    orders: Optional[str],
    tolerances: tuple[str, ...],
    seed: Optional[int],
) -> RunConfig:
    overrides: dict[str, Any] = {}
    experiment: dict[str, Any] = {}
    if out_dir is not None:
        experiment["out_dir"] = out_dir
    if seed is not None:
        experiment["seed"] = seed
    if orders is not None:
        try:
            experiment["orders"] = tuple(int(k) for k in orders.split(","))
        except ValueError:
            raise ConfigurationException(f"Orders '{orders}' are not of the form a,b,c")
    if experiment:
        overrides["experiment"] = experiment
    if symbol_spec is not None:
        name, params = parse_symbol(symbol_spec)
        overrides["symbol"] = {"name": name, "params": params, "path": None}
    if tolerances:
        overrides["tolerances"] = dict(parse_tolerance(t) for t in tolerances)
    return load_run_config(config_path, overrides)


def write_outputs(
    command: str,
    cfg: RunConfig,
    records: list[dict],
    summary: dict,
    plot: Optional[np.ndarray] = None,
    plot_header: str = "",
) -> Path:
    out = Path(cfg.experiment.out_dir) / cfg.experiment.name / command
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(records).to_csv(out / "records.tsv", sep="\t", index=False, float_format="%.17g")
    payload = {
        "command": command,
        "version": __version__,
        "config": cfg.dict(),
        "tolerances": cfg.resolved_tolerances(),
        **summary,
    }
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    if plot is not None:
        np.savetxt(out / "plot.dat", plot, fmt="%.17g", header=plot_header)
    logger.info("%s: outputs in %s", command, out)
    return out


def finish(command: str, passed: bool, summary: dict):
    click.echo(json.dumps({"command": command, "verdict": "pass" if passed else "fail", **summary}, sort_keys=True, default=str))
    if not passed:
        raise VerdictFailure(f"{command}: verdict fail", data=summary)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging for the engine.")
@click.version_option(__version__)
def main(verbose: bool):
    """Pseudo-differential calculus on the Heisenberg group."""
    setup_logging(verbose)


# ---------- calibrate ----------
def _plancherel_constant(cfg: RunConfig, train_count: int, dim: int, quant_half_width: float) -> float:
    functions = random_gaussians(group_box(cfg), train_count, cfg.experiment.seed)
    u_grid = make_grid(cfg.grid.n, quant_half_width, cfg.grid.points)
    return calibrate_plancherel(functions, build_lambda_grid(cfg), dim, u_grid, cfg.resolved_tolerances()).constant


@main.command()
@run_options
@click.option("--convergence/--no-convergence", default=False, help="Recalibrate at doubled lambda_max and doubled N_h.")
@click.option("--persist", is_flag=True, help="Also write the constants into the --config file.")
@exit_on_error
def calibrate(config_path, out_dir, symbol_spec, orders, tolerances, seed, convergence, persist):
    """Calibrate c_n (Plancherel) and c'_n (Fourier inversion)."""
    cfg = resolve_config(config_path, out_dir, symbol_spec, orders, tolerances, seed)
    tol = cfg.resolved_tolerances()
    n, dim = cfg.grid.n, cfg.grid.hermite_dim
    lgrid = build_lambda_grid(cfg)
    u_grid = make_grid(n, cfg.grid.quant_half_width, cfg.grid.points)
    functions = random_gaussians(group_box(cfg), cfg.experiment.samples + 1, cfg.experiment.seed)
    train, held_out = functions[:-1], functions[-1]

    plancherel = calibrate_plancherel(train, lgrid, dim, u_grid, tol)
    held_out_error = plancherel_error(held_out, lgrid, plancherel.constant, dim, u_grid)
    calibrated = cfg.copy(update={"calibration": cfg.calibration.copy(update={"c_n": plancherel.constant})})
    inversion = calibrate_inversion(train, build_quant_config(calibrated))

    summary = {
        "c_n": plancherel.constant,
        "c_n_reference": plancherel.reference,
        "c_n_spread": plancherel.spread,
        "c_n_prime": inversion.constant,
        "c_n_prime_reference": inversion.reference,
        "c_n_prime_spread": inversion.spread,
        "ratio_to_plancherel": inversion.ratio_to_plancherel,
        "held_out_error": held_out_error,
        "tail_fraction": plancherel.tail_fraction,
        "closure_fraction": plancherel.closure_fraction,
        "truncation_delta": plancherel.truncation_delta,
    }
    passed = held_out_error <= tol["plancherel_spread"]

    if convergence:
        if 2 * dim > cfg.grid.points // 2:
            raise ConfigurationException("Doubling N_h needs points >= 4 N_h", data={"dim": dim, "points": cfg.grid.points})
        wide_band = cfg.copy(
            update={
                "lam": cfg.lam.copy(update={"lam_max": 2 * cfg.lam.lam_max}),
                "quantize": cfg.quantize.copy(update={"centre_points": 2 * cfg.quantize.centre_points}),
            }
        )
        band_delta = abs(_plancherel_constant(wide_band, len(train), dim, cfg.grid.quant_half_width) / plancherel.constant - 1)
        basis_delta = abs(_plancherel_constant(cfg, len(train), 2 * dim, math.sqrt(2) * cfg.grid.quant_half_width) / plancherel.constant - 1)
        summary.update({"lambda_max_delta": band_delta, "hermite_dim_delta": basis_delta})
        passed = passed and max(band_delta, basis_delta) <= tol["convergence"]

    records = [
        {
            "function": index,
            "role": "train",
            "c_n": c,
            "c_n_prime": c_prime,
            "relative_gap": abs(c / plancherel.constant - 1),
            "plancherel_error": float("nan"),
        }
        for index, (c, c_prime) in enumerate(zip(plancherel.per_function, inversion.per_function))
    ]
    records.append(
        {
            "function": len(train),
            "role": "held_out",
            "c_n": float("nan"),
            "c_n_prime": float("nan"),
            "relative_gap": float("nan"),
            "plancherel_error": held_out_error,
        }
    )
    full, _ = hs_profile(held_out, lgrid, dim, u_grid)
    plot = np.column_stack([lgrid.nodes, np.abs(lgrid.nodes) ** n * full])
    out = write_outputs("calibrate", cfg, records, summary, plot, "lambda |lambda|^n*||pi_lambda(f)||_HS^2")

    save_calibration(out / "calibration.ini", plancherel.constant, inversion.constant)
    if persist:
        if config_path is None:
            raise ConfigurationException("--persist needs --config")
        save_calibration(config_path, plancherel.constant, inversion.constant)
    finish("calibrate", passed, summary)


# ---------- identity-table ----------
@main.command("identity-table")
@run_options
@exit_on_error
def identity_table_command(config_path, out_dir, symbol_spec, orders, tolerances, seed):
    """Difference-operator identities and renormalisation checks as max errors."""
    cfg = resolve_config(config_path, out_dir, symbol_spec, orders, tolerances, seed)
    report = identity_table(n=cfg.grid.n, tol=cfg.resolved_tolerances()["identity"])
    worst = max(row.max_error for row in report.rows)
    summary = {"rows": len(report.rows), "worst_error": worst, "failed": [r.identity for r in report.rows if not r.passed]}
    write_outputs("identity-table", cfg, report.records(), summary)
    finish("identity-table", report.verdict, summary)


# ---------- membership ----------
@main.command("membership")
@run_options
@click.option("--m", "order", type=float, default=None, help="Order m of the class (default: the symbol's).")
@click.option("--rho", type=float, default=None)
@click.option("--delta", type=float, default=None)
@exit_on_error
def membership_command(config_path, out_dir, symbol_spec, orders, tolerances, seed, order, rho, delta):
    """Shubin-type estimates of a symbol on a sample box and its refinement."""
    cfg = resolve_config(config_path, out_dir, symbol_spec, orders, tolerances, seed)
    sym = build_symbol(cfg)
    update = {k: v for k, v in (("order", order), ("rho", rho), ("delta", delta)) if v is not None}
    if update:
        sym = sym.copy(update=update)
    report = membership(sym, cfg.experiment.orders, growth_tol=cfg.resolved_tolerances()["refinement_growth"])
    summary = {
        "symbol": report.name,
        "m": report.m,
        "rho": report.rho,
        "delta": report.delta,
        "orders": list(report.orders),
        "box": report.box,
        "refined_box": report.refined_box,
    }
    plot = np.array([[i, row.constant, row.refined_constant] for i, row in enumerate(report.rows)])
    write_outputs("membership", cfg, report.records(), summary, plot, "row constant refined_constant")
    finish("membership", report.verdict, summary)


# ---------- parametrix ----------
@main.command("parametrix")
@run_options
@click.option("--R", "R", type=float, default=None, help="Cutoff radius (default: experiment.R).")
@click.option("--membership/--no-membership", "check_membership", default=False, help="Also check the parametrix symbol at order -m.")
@exit_on_error
def parametrix_command(config_path, out_dir, symbol_spec, orders, tolerances, seed, R, check_membership):
    """Leading-order left parametrix and its residual at R and 2R."""
    cfg = resolve_config(config_path, out_dir, symbol_spec, orders, tolerances, seed)
    tol = cfg.resolved_tolerances()
    sym = build_symbol(cfg)
    R = cfg.experiment.R if R is None else R
    qcfg = build_quant_config(cfg)
    samples = build_samples(cfg)
    slices = [fourier_slices(phi, qcfg) for phi in samples]

    records, worst = [], {}
    for radius in (R, 2 * R):
        for index, (phi, s) in enumerate(zip(samples, slices)):
            result = parametrix_residual(sym, radius, phi, qcfg, slices=s)
            records.append({"sample": index, **result.dict()})
        worst[radius] = max(r["defect"] for r in records if r["R"] == radius)

    defect, refined = worst[R], worst[2 * R]
    passed = defect <= tol["parametrix"] and (refined <= defect / 2 or refined <= tol["parametrix_floor"])
    summary = {"symbol": sym.name, "R": R, "defect": defect, "defect_2R": refined}
    if check_membership:
        inverse = parametrix_leading(sym, R)
        report = membership(inverse, cfg.experiment.orders, growth_tol=tol["refinement_growth"])
        summary["parametrix_membership"] = report.verdict
        passed = passed and report.verdict
    plot = np.array(
        [[radius, worst[radius], max(r["cutoff_defect"] for r in records if r["R"] == radius)] for radius in (R, 2 * R)]
    )
    write_outputs("parametrix", cfg, records, summary, plot, "R defect cutoff_defect")
    finish("parametrix", passed, summary)


# ---------- probe ----------
@main.command("probe")
@run_options
@click.option("--mode", type=click.Choice(["bounded", "subelliptic"]), default="bounded")
@click.option("--s", "s", type=float, default=None, help="Sobolev index (default: experiment.s).")
@click.option("--m0", type=float, default=None, help="Gain of the subelliptic estimate (default: experiment.m0).")
@click.option("--bound", type=float, default=None, help="Fail when the ratio exceeds this value.")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Sample in container format.")
@exit_on_error
def probe_command(config_path, out_dir, symbol_spec, orders, tolerances, seed, mode, s, m0, bound, input_path):
    """Sobolev boundedness or subelliptic ratio over sample functions."""
    cfg = resolve_config(config_path, out_dir, symbol_spec, orders, tolerances, seed)
    tol = cfg.resolved_tolerances()
    sym = build_symbol(cfg)
    s = cfg.experiment.s if s is None else s
    m0 = cfg.experiment.m0 if m0 is None else m0
    qcfg = build_quant_config(cfg)
    samples = build_samples(cfg, input_path)
    if mode == "bounded":
        report = boundedness_probe(sym, s, samples, qcfg)
    else:
        report = subelliptic_probe(sym, m0, s, samples, qcfg)
    records = [r.dict() for r in report.records]
    stable = all(math.isfinite(r.ratio) and r.truncation_delta <= tol["refinement_growth"] for r in report.records)
    passed = stable and (bound is None or report.ratio <= bound)
    summary = {"symbol": sym.name, "mode": mode, "s": s, "m0": m0, "ratio": report.ratio, "bound": bound}
    plot = np.array([[r.sample, r.ratio] for r in report.records])
    write_outputs("probe", cfg, records, summary, plot, "sample ratio")
    finish("probe", passed, summary)


# ---------- apply ----------
@main.command("apply")
@run_options
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Sample in container format.")
@click.option("--route", type=click.Choice(["trace", "weyl"]), default="trace", help="Hermite-trace or Weyl-side quantization.")
@click.option("--adjoint-check", is_flag=True, help="Compare <Op phi, psi> with <phi, Op* psi>.")
@exit_on_error
def apply_command(config_path, out_dir, symbol_spec, orders, tolerances, seed, input_path, route, adjoint_check):
    """Apply Op(sigma) to sample functions and write the results in container format."""
    cfg = resolve_config(config_path, out_dir, symbol_spec, orders, tolerances, seed)
    tol = cfg.resolved_tolerances()
    sym = build_symbol(cfg)
    qcfg = build_quant_config(cfg)
    samples = build_samples(cfg, input_path)

    records, outputs = [], []
    for index, phi in enumerate(samples):
        report = apply_report(sym, phi, qcfg) if route == "trace" else apply_weyl_form_report(sym, phi, qcfg)
        outputs.append(report.function)
        record = {
            "sample": index,
            "input_norm": phi.l2_norm(),
            "output_norm": report.function.l2_norm(),
            "tail_fraction": report.tail_fraction,
        }
        if adjoint_check:
            partner = samples[(index + 1) % len(samples)]
            record["adjoint_gap"] = adjoint_probe(sym, phi, partner, qcfg)
        records.append(record)

    passed = not adjoint_check or all(r["adjoint_gap"] <= tol["adjoint"] for r in records)
    summary = {"symbol": sym.name, "route": route, "samples": len(samples)}
    if adjoint_check:
        summary["adjoint_gap"] = max(r["adjoint_gap"] for r in records)

    first = outputs[0]
    centre = tuple(g.points // 2 for g in first.grid[1:])
    line = first.values[(slice(None),) + centre]
    plot = np.column_stack([first.grid[0].nodes, line.real, line.imag])
    out = write_outputs("apply", cfg, records, summary, plot, "x1 re im")
    for index, f in enumerate(outputs):
        write_grid_function(out / f"output_{index}.hgf", f)
    finish("apply", passed, summary)
