"""
Command handlers behind the CLI subcommands

Each handler returns a process exit code on success and raises an InvarGCError
subclass on failure; main() maps exceptions to exit codes.
"""

import json
from typing import List, Optional

from pydantic import ValidationError as PydanticValidationError

from invargc.models.schemas import HyperParams, NonlinearArch
from invargc.services.benchmark_service import benchmark_service
from invargc.services.datagen_service import generate_benchmark
from invargc.services.dataset_service import dataset_service, standardize
from invargc.services.linear_solver import fit_linear
from invargc.services.nonlinear_solver import fit_nonlinear
from invargc.utils.constants import ERROR_MESSAGES, ExitCode, FitMode, Method
from invargc.utils.error_handler import (
    BenchmarkFailure,
    ConfigValidationError,
    SelfTestFailure,
    validation_error_from_pydantic,
)
from invargc.utils.helpers import timed
from invargc.utils.logger import logger
from invargc.utils.validation import ProxFn, run_self_tests


def console(line: str) -> None:
    """Command summaries go to standard output; logs go to standard error"""
    print(line, flush=True)


# ============================================
# generate / fit / eval
# ============================================

def cmd_generate(config_path: str, out_dir: str, seed: Optional[int] = None) -> int:
    """Generate a benchmark dataset directory with graph.json"""
    cfg = dataset_service.load_gen_config(config_path)
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})

    ds, truth = generate_benchmark(cfg)
    dataset_service.save_dataset(ds, out_dir, truth)

    n_intervened = int(truth.intervention_mask.any(axis=(1, 2)).sum())
    console(
        f"generated N={ds.n_envs} d={ds.n_vars} T={ds.n_steps} "
        f"edges={int(truth.adjacency.sum())} intervened_envs={n_intervened} -> {out_dir}"
    )
    return ExitCode.OK


def cmd_fit(
    data_dir: str,
    mode: str,
    out_path: str,
    seed: int = 0,
    lambda_z: Optional[float] = None,
    alpha: Optional[float] = None,
    lambda_w: Optional[float] = None,
    latents: int = 1,
    max_iters: Optional[int] = None,
    tol: Optional[float] = None
) -> int:
    """Fit the linear or nonlinear model on a standardized dataset and write model.json"""
    try:
        fit_mode = FitMode(mode)
    except ValueError:
        raise ConfigValidationError(f"Unknown mode '{mode}'", details={"field": "mode"})

    ds = standardize(dataset_service.load_dataset(data_dir))
    try:
        hp = HyperParams.defaults(
            ds.n_steps,
            n_latents=latents,
            mode=fit_mode,
            lambda_z=lambda_z,
            alpha=alpha,
            lambda_w=lambda_w,
            max_iters=max_iters,
            tol=tol,
        )
    except PydanticValidationError as e:
        error = validation_error_from_pydantic(e, "hyperparameters")
        if alpha is not None and not 0.0 < alpha < 1.0:
            error.message = f"{error.message} ({ERROR_MESSAGES['ALPHA_RANGE']})"
        raise error

    if fit_mode == FitMode.LINEAR:
        result = fit_linear(ds, hp, seed)
    else:
        result = fit_nonlinear(ds, hp, NonlinearArch(), seed)

    dataset_service.save_model(result, out_path)
    console(
        f"fit mode={fit_mode.value} final_objective={result.final_objective:.10g} "
        f"iterations={result.n_iters} converged={str(result.converged).lower()} -> {out_path}"
    )
    return ExitCode.OK


def cmd_eval(model_path: str, truth_path: str, out_path: str) -> int:
    """Score a fitted model against graph.json and write report.json"""
    result = dataset_service.load_model(model_path)
    truth = dataset_service.load_truth(truth_path)
    report = benchmark_service.evaluate_fit(result, truth)
    dataset_service.write_json(out_path, report.model_dump(mode="json"))

    def fmt(value: Optional[float]) -> str:
        return "undefined" if value is None else f"{value:.4f}"

    console(
        f"eval auroc={fmt(report.auroc)} auprc={fmt(report.auprc)} "
        f"intervention_auroc={fmt(report.intervention_auroc)} -> {out_path}"
    )
    return ExitCode.OK


# ============================================
# benchmark / ablate
# ============================================

def parse_methods(methods: str) -> List[str]:
    """Comma-separated method list, order preserved, duplicates dropped"""
    names: List[str] = []
    for raw in methods.split(","):
        name = raw.strip()
        if not name:
            continue
        try:
            value = Method(name).value
        except ValueError:
            allowed = ", ".join(m.value for m in Method)
            raise ConfigValidationError(
                f"Unknown method '{name}' (allowed: {allowed})", details={"field": "methods"}
            )
        if value not in names:
            names.append(value)
    if not names:
        raise ConfigValidationError("At least one method is required", details={"field": "methods"})
    return names


def _check_seeds(seeds: int) -> None:
    if seeds < 1:
        raise ConfigValidationError("seeds must be >= 1", details={"field": "seeds"})


def _write_grid_report(report, out_md: str, out_json: str) -> None:
    dataset_service.write_json(out_json, report.model_dump(mode="json"))
    dataset_service.write_text(out_md, benchmark_service.render_markdown(report))
    console(
        f"{report.kind}: {benchmark_service.n_ok(report)}/{len(report.cells)} cells ok, "
        f"total wall time {report.total_wall_time_seconds:.1f} s -> {out_md}, {out_json}"
    )
    if benchmark_service.n_ok(report) == 0:
        raise BenchmarkFailure(f"every {report.kind} cell failed", details={"cells": len(report.cells)})


def cmd_benchmark(config_path: str, seeds: int, methods: str, out_md: str, out_json: str) -> int:
    """Run every method on every seed and write the Markdown and JSON reports"""
    cfg = dataset_service.load_gen_config(config_path)
    _check_seeds(seeds)
    names = parse_methods(methods)
    report = benchmark_service.run_benchmark(cfg, seeds, names)
    _write_grid_report(report, out_md, out_json)
    return ExitCode.OK


def cmd_ablate(config_path: str, seeds: int, out_md: str, out_json: str) -> int:
    """Run the latent-module ablation and write the Markdown and JSON reports"""
    cfg = dataset_service.load_gen_config(config_path)
    _check_seeds(seeds)
    report = benchmark_service.run_ablation(cfg, seeds)
    _write_grid_report(report, out_md, out_json)
    return ExitCode.OK


# ============================================
# check
# ============================================

def cmd_check(prox_fn: Optional[ProxFn] = None) -> int:
    """Run the numerical self-test battery; print one line per suite"""
    with timed() as clock:
        results = run_self_tests(prox_fn=prox_fn)

    for name, suite in results["suites"].items():
        status = "PASS" if suite["status"] == "passed" else "FAIL"
        max_error = suite.get("max_error")
        error_text = "n/a" if max_error is None else f"{max_error:.3e}"
        console(f"{name}: {status} ({suite['cases']} cases, max error {error_text})")
        if suite["status"] != "passed":
            console(f"  failing case: {json.dumps(suite.get('failing_case'), sort_keys=True, default=str)}")

    logger.debug(f"Self-tests took {clock['seconds']:.2f} s")
    if results["failed"]:
        raise SelfTestFailure(
            f"self-test suites failed: {', '.join(results['failed'])}",
            details={"failed": results["failed"]},
        )
    return ExitCode.OK
