#!/usr/bin/env python3
"""
Command-line front end for the SILL Koopman toolkit.

Commands:
    fit <config>                     build dictionary, fit W, assemble K_G, write model + report
    simulate <model> <config>        reference and lifted trajectories per initial condition
    sweep-alpha <config>             pair error and closure residual across steepness values
    error-bounds <model> <config>    sup table, trajectory budget and measured error
    demo {vdp|toggle} <outdir>       canned config, then fit + simulate + error-bounds
    shift-error-grid                 sup join error for two 1-D centers across (alpha, shift)

Exit codes: 0 ok, 2 invalid configuration or arguments, 3 numerical failure.
"""

import argparse
import copy
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config.config import (
    ALPHA_SWEEP_FILENAME,
    CONFIG_FILENAME,
    DEMO_CONFIGS,
    ERROR_BOUNDS_FILENAME,
    MAX_WORKERS,
    MODEL_FILENAME,
    REGRESSION_REPORT_FILENAME,
    SHOW_PROGRESS,
    SIMULATION_SUMMARY_FILENAME,
    print_config_summary,
    setup_logging,
)
from koopman_sill import __version__
from koopman_sill.error_analysis import (
    build_error_bound_report,
    delta_error_budget,
    delta_propagation_bound,
    estimate_delta_sup,
    max_pair_error,
    offcenter_points,
    refined_delta_propagation_bound,
    shift_error_grid,
    trajectory_error_budget,
)
from koopman_sill.errors import EXIT_OK, ContractViolation, SILLError
from koopman_sill.experiment import ExperimentConfig, initial_conditions, load_experiment_config
from koopman_sill.generator import ClosureResidualReport, assemble_generator, closure_residual
from koopman_sill.model_io import ModelFile, load_model, save_model, write_json, write_table_csv, write_trajectory_csv
from koopman_sill.regression import RegressionReport, fit_weights
from koopman_sill.simulation import SimulationOutcome, predict_and_compare

logger = logging.getLogger(__name__)


# ---- PIPELINE STEPS ----
@dataclass(frozen=True)
class FitResult:
    model: ModelFile
    report: RegressionReport
    closure: ClosureResidualReport
    model_path: Path
    report_path: Path


def run_fit(config: ExperimentConfig, out_dir: Path, assembly_mode: str = "projection") -> FitResult:
    """Dictionary, weights and generator for one configuration, written to out_dir."""
    dictionary = config.build_dictionary()
    f = config.build_field()
    grid = config.build_grid(dictionary)
    weights, report = fit_weights(f, dictionary, grid, config.regression.ridge)
    generator = assemble_generator(dictionary, weights, f, grid, config.regression.ridge, mode=assembly_mode)
    closure = closure_residual(dictionary, weights, f, generator, grid)

    provenance = {
        "config_hash": config.config_hash(),
        "build_version": __version__,
        "system": {"name": config.system_name, "params": config.system_params},
        "sample_grid": {"mode": grid.mode, "per_dim": grid.per_dim, "seed": grid.seed, "size": grid.size},
    }
    model = ModelFile(dictionary, weights, generator, provenance=provenance)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / CONFIG_FILENAME, config.document)
    model_path = save_model(model, out_dir / MODEL_FILENAME)
    report_path = write_json(out_dir / REGRESSION_REPORT_FILENAME, {
        "config_hash": provenance["config_hash"],
        "regression": report.to_dict(),
        "generator": {
            "assembly_mode": generator.assembly_mode,
            "rank_deficient": generator.rank_deficient,
            "spectral_abscissa": generator.spectral_abscissa,
            "lambda_row_rms_residual": generator.row_residuals,
        },
        "closure_residual": closure.to_dict(),
    })
    return FitResult(model, report, closure, model_path, report_path)


def _check_model_matches(model: ModelFile, config: ExperimentConfig) -> None:
    if model.state_dim != config.state_dim:
        raise ContractViolation(f"model has {model.state_dim} states but the config describes {config.state_dim}")


def _fan_out(function, items: Sequence, jobs: Optional[int], desc: str) -> List:
    """Ordered parallel map with a progress bar."""
    with ThreadPoolExecutor(max_workers=jobs or MAX_WORKERS) as executor:
        return list(tqdm(executor.map(function, items), total=len(items), desc=desc, disable=not SHOW_PROGRESS))


def run_simulate(model: ModelFile, config: ExperimentConfig, out_dir: Path, jobs: Optional[int] = None) -> List[SimulationOutcome]:
    """Reference and predicted CSVs per initial condition plus a summary JSON."""
    _check_model_matches(model, config)
    f = config.build_field()
    starts = initial_conditions(config)
    dt, horizon = config.simulation.dt, config.simulation.horizon

    def simulate(x0: np.ndarray) -> SimulationOutcome:
        return predict_and_compare(model.dictionary, model.generator, f, x0, dt, horizon)

    outcomes = _fan_out(simulate, list(starts), jobs, "🧮 Simulating")
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = []
    for index, outcome in enumerate(outcomes):
        write_trajectory_csv(out_dir / f"reference_{index}.csv", outcome.reference)
        write_trajectory_csv(out_dir / f"predicted_{index}.csv", outcome.predicted)
        runs.append(dict(outcome.summary(), index=index, in_domain=model.dictionary.contains(outcome.x0)))
    write_json(out_dir / SIMULATION_SUMMARY_FILENAME, {
        "config_hash": config.config_hash(),
        "dt": dt,
        "horizon": horizon,
        "runs": runs,
    })
    return outcomes


def sweep_alpha_rows(config: ExperimentConfig, jobs: Optional[int] = None) -> List[Dict[str, float]]:
    """One row per steepness: refit, reassemble, then max pair error off the centers and closure residual."""
    base = config.build_dictionary()
    f = config.build_field()
    analysis = config.analysis
    points = offcenter_points(base, analysis.offcenter_samples, analysis.seed, analysis.offcenter_jitter)

    def sweep_point(alpha: float) -> Dict[str, float]:
        dictionary = base.with_alpha(alpha)
        grid = config.build_grid(dictionary)
        weights, report = fit_weights(f, dictionary, grid, config.regression.ridge)
        generator = assemble_generator(dictionary, weights, f, grid, config.regression.ridge)
        closure = closure_residual(dictionary, weights, f, generator, grid)
        return {
            "alpha": float(alpha),
            "max_pair_error": max_pair_error(dictionary, points),
            "closure_residual_l2": closure.rms,
            "regression_rel_l2_max": float(np.max(report.rel_l2_error)),
        }

    return _fan_out(sweep_point, list(analysis.alphas), jobs, "📈 Alpha sweep")


def run_error_bounds(model: ModelFile, config: ExperimentConfig, out_dir: Path, jobs: Optional[int] = None) -> Dict:
    """Budget table, regression propagation terms and the measured error they should cover."""
    _check_model_matches(model, config)
    dictionary, weights = model.dictionary, model.weights
    analysis = config.analysis
    f = config.build_field()
    report = build_error_bound_report(
        dictionary, weights, analysis.sup_density, analysis.refine_iterations, jobs, SHOW_PROGRESS,
    )
    delta_sup = estimate_delta_sup(f, weights, dictionary)
    alpha = dictionary.alpha
    horizon = config.simulation.horizon

    budget_table = []
    for t in np.linspace(0.0, horizon, analysis.budget_points):
        closure_part = trajectory_error_budget(dictionary, weights, report, t)
        delta_part = delta_error_budget(delta_sup, alpha, dictionary.n_centers, t)
        budget_table.append({"t": float(t), "closure": closure_part, "regression": delta_part,
                             "total": closure_part + delta_part})

    measured = []
    for index, x0 in enumerate(initial_conditions(config)):
        interior = bool(np.all(x0 > dictionary.domain_lo) and np.all(x0 < dictionary.domain_hi))
        outcome = predict_and_compare(dictionary, model.generator, f, x0, config.simulation.dt, horizon)
        times = outcome.comparison.times
        allowed = (trajectory_error_budget(dictionary, weights, report, times)
                   + delta_error_budget(delta_sup, alpha, dictionary.n_centers, times))
        excess = outcome.comparison.errors - allowed
        measured.append({
            "index": index,
            "x0": outcome.x0,
            "mesh_interior": interior,
            "rmse": outcome.comparison.rmse,
            "sup_error": outcome.comparison.sup,
            "max_excess_over_budget": float(np.max(excess)),
            "within_budget": bool(np.all(excess <= 0.0)),
        })

    payload = {
        "config_hash": config.config_hash(),
        "model_config_hash": model.provenance.get("config_hash"),
        "sup_table": report.to_dict(),
        "total_rate": report.total_rate,
        "budget_at_horizon": budget_table[-1]["total"],
        "budget": budget_table,
        "delta_sup": delta_sup,
        "delta_propagation": delta_propagation_bound(delta_sup, alpha),
        "delta_propagation_refined": refined_delta_propagation_bound(delta_sup, alpha),
        "measured": measured,
    }
    write_json(out_dir / ERROR_BOUNDS_FILENAME, payload)
    return payload


# ---- COMMANDS ----
def _output_dir(args, config: ExperimentConfig) -> Path:
    return Path(args.out) if getattr(args, "out", None) else config.output_dir


def cmd_fit(args) -> int:
    config = load_experiment_config(args.config)
    if args.verbose:
        print_config_summary(config.document)
    out_dir = _output_dir(args, config)
    print(f"🔧 Fitting {config.system_name} model...")
    result = run_fit(config, out_dir, args.assembly)
    errors = ", ".join(f"{e:.3%}" for e in result.report.rel_l2_error)
    print(f"✅ Regression relative L2 error per component: {errors}")
    if result.report.rank_deficient:
        print("⚠️  Regression design was rank deficient; minimum-norm weights were used")
    print(f"📊 Closure residual: RMS {result.closure.rms:.4e}, sup {result.closure.sup:.4e}")
    print(f"📁 Model:  {result.model_path}")
    print(f"📁 Report: {result.report_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    config = load_experiment_config(args.config)
    out_dir = _output_dir(args, config)
    outcomes = run_simulate(model, config, out_dir, args.jobs)
    for index, outcome in enumerate(outcomes):
        flag = "⚠️ " if outcome.diverged else "✅"
        print(f"{flag} x0={outcome.x0.tolist()}: RMSE {outcome.comparison.rmse:.4e}, sup {outcome.comparison.sup:.4e}")
    print(f"📁 Trajectories and summary written to {out_dir}")
    return EXIT_OK


def cmd_sweep_alpha(args) -> int:
    config = load_experiment_config(args.config)
    out_dir = _output_dir(args, config)
    rows = sweep_alpha_rows(config, args.jobs)
    path = write_table_csv(out_dir / ALPHA_SWEEP_FILENAME, rows)
    for row in rows:
        print(f"📊 alpha={row['alpha']:g}: max |E| {row['max_pair_error']:.4e}, "
              f"closure residual {row['closure_residual_l2']:.4e}")
    print(f"📁 Sweep written to {path}")
    return EXIT_OK


def cmd_error_bounds(args) -> int:
    model = load_model(args.model)
    config = load_experiment_config(args.config)
    out_dir = _output_dir(args, config)
    payload = run_error_bounds(model, config, out_dir, args.jobs)
    print(f"📊 Budget rate {payload['total_rate']:.4e} per unit time; "
          f"budget at t={config.simulation.horizon:g}: {payload['budget_at_horizon']:.4e}")
    for row in payload["measured"]:
        status = "✅" if row["within_budget"] else ("❌" if row["mesh_interior"] else "⚠️ ")
        print(f"{status} x0={list(row['x0'])}: sup error {row['sup_error']:.4e}")
    print(f"📁 Report written to {out_dir / ERROR_BOUNDS_FILENAME}")
    return EXIT_OK


def run_demo(name: str, out_dir: Path, jobs: Optional[int] = None) -> Dict:
    """Write the canned config for `name` into out_dir and run fit, simulate and error-bounds."""
    if name not in DEMO_CONFIGS:
        raise ContractViolation(f"unknown demo {name!r} (choose from {sorted(DEMO_CONFIGS)})")
    document = copy.deepcopy(DEMO_CONFIGS[name])
    document["output"] = {"directory": str(out_dir)}
    out_dir.mkdir(parents=True, exist_ok=True)
    config_path = write_json(out_dir / CONFIG_FILENAME, document)
    config = load_experiment_config(config_path)
    fit = run_fit(config, out_dir)
    outcomes = run_simulate(fit.model, config, out_dir, jobs)
    bounds = run_error_bounds(fit.model, config, out_dir, jobs)
    return {"fit": fit, "outcomes": outcomes, "bounds": bounds}


def cmd_demo(args) -> int:
    out_dir = Path(args.outdir)
    print(f"🚀 Running the {args.name} demo into {out_dir}")
    result = run_demo(args.name, out_dir, args.jobs)
    errors = ", ".join(f"{e:.3%}" for e in result["fit"].report.rel_l2_error)
    print(f"✅ Regression relative L2 error: {errors}")
    for outcome in result["outcomes"]:
        print(f"📊 x0={outcome.x0.tolist()}: RMSE {outcome.comparison.rmse:.4e}")
    print(f"📊 Budget at horizon: {result['bounds']['budget_at_horizon']:.4e}")
    print(f"📁 All outputs in {out_dir}")
    return EXIT_OK


def cmd_shift_error_grid(args) -> int:
    rows = shift_error_grid(args.alphas, args.shifts, args.density)
    path = write_table_csv(args.output, rows, columns=["alpha", "shift", "sup_error"])
    print(f"📁 {len(rows)} rows written to {path}")
    return EXIT_OK


# ---- ARGUMENT PARSING ----
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sill-koopman", description="SILL Koopman generator toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--jobs", type=int, default=MAX_WORKERS, help="worker threads (default: %(default)s)")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model from an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: output.directory of the config)")
    p.add_argument("--assembly", choices=["projection", "state_only"], default="projection")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("simulate", help="simulate reference and lifted trajectories")
    p.add_argument("model")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep-alpha", help="pair error and closure residual versus alpha")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_sweep_alpha)

    p = sub.add_parser("error-bounds", help="trajectory error budget report")
    p.add_argument("model")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_error_bounds)

    p = sub.add_parser("demo", help="run a canned demo end to end")
    p.add_argument("name", choices=sorted(DEMO_CONFIGS))
    p.add_argument("outdir")
    p.set_defaults(handler=cmd_demo)

    p = sub.add_parser("shift-error-grid", help="join error table for two shifted 1-D centers")
    p.add_argument("--alphas", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0, 20.0, 50.0])
    p.add_argument("--shifts", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.25, 0.5, 1.0])
    p.add_argument("--density", type=int, default=64)
    p.add_argument("--output", default="shift_error_grid.csv")
    p.set_defaults(handler=cmd_shift_error_grid)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.verbose else None)
    if args.jobs is not None and args.jobs < 1:
        print("❌ --jobs must be at least 1")
        return ContractViolation.exit_code
    try:
        return args.handler(args)
    except SILLError as e:
        logger.debug("command failed", exc_info=True)
        print(f"❌ {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
