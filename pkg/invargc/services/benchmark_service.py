"""
Evaluation, benchmark and ablation harness
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from invargc import __version__
from invargc.models.domain import GroundTruth, MultiEnvDataset
from invargc.models.schemas import (
    BenchmarkCell,
    BenchmarkReport,
    EvalReport,
    FitResult,
    GenConfig,
    HyperParams,
    MethodSummary,
    ThresholdRule,
)
from invargc.services.analysis_service import (
    binarize,
    edge_scores,
    environment_calls,
    intervention_scores,
    latent_alignment,
    node_level_calls,
)
from invargc.services.baseline_service import baseline_edge_scores, fit_var_lasso
from invargc.services.datagen_service import generate_benchmark
from invargc.services.dataset_service import dataset_service, standardize
from invargc.services.linear_solver import fit_linear
from invargc.services.metrics_service import evaluate_graph, intervention_auroc
from invargc.services.nonlinear_solver import fit_nonlinear
from invargc.utils.constants import CellStatus, FitMode, Method
from invargc.utils.error_handler import InvarGCError, ShapeMismatchError, UndefinedMetricError
from invargc.utils.helpers import format_mean_sd, mean_sd, timed, to_jsonable
from invargc.utils.logger import logger

# Ablation variant -> (latent budget, lambda_z override) given the true latent count p
AblationVariant = Callable[[int], Tuple[int, Optional[float]]]
ABLATION_VARIANTS: Dict[str, AblationVariant] = {
    "no-lcim": lambda p: (0, None),
    "lcim-unregularized": lambda p: (p, 0.0),
    "lcim-matched": lambda p: (p, None),
    "lcim-overcomplete": lambda p: (p + 1, None),
    "lcim-undercomplete": lambda p: (p - 1, None),
}


class BenchmarkService:
    """Evaluate fitted models and run seeded benchmark grids"""

    # ============================================
    # Evaluation
    # ============================================

    def evaluate_fit(
        self,
        result: FitResult,
        truth: GroundTruth,
        rule: Optional[ThresholdRule] = None
    ) -> EvalReport:
        """
        Score a fitted model against its ground truth

        Args:
            result: Fitted model
            truth: Generator ground truth
            rule: Binarization rule for edges and interventions

        Returns:
            EvalReport; undefined metrics are null and listed in warnings
        """
        rule = rule or ThresholdRule()
        dataset_service.check_model_against_truth(result, truth)
        model = result.model
        warnings: List[str] = []

        scores = edge_scores(model)
        auroc, auprc = None, None
        try:
            auroc, auprc = evaluate_graph(scores, truth.adjacency)
        except UndefinedMetricError as e:
            warnings.append(f"graph metrics undefined: {e.message}")

        iv = intervention_scores(model)
        iv_auroc = None
        try:
            iv_auroc = intervention_auroc(iv, truth.intervention_mask)
        except UndefinedMetricError as e:
            warnings.append(f"intervention AUROC undefined: {e.message}")

        graph = binarize(scores.scores, rule)
        alignment = None
        if model.n_latents == 0 or truth.n_latents == 0:
            warnings.append("latent alignment skipped: model or truth has no latents")
        else:
            true_z = truth.latent_series[:, :, :-1]
            if true_z.shape[2] != model.n_inputs:
                raise ShapeMismatchError(
                    "latent trajectories of model and truth have different lengths",
                    details={"model": model.n_inputs, "truth": int(true_z.shape[2])},
                )
            alignment = latent_alignment(model.z, true_z)
            if alignment.mean_correlation is None:
                warnings.append("latent alignment undefined in every environment")

        return EvalReport(
            version=__version__,
            mode=result.mode.value,
            hyperparams=result.hyperparams.model_dump(mode="json"),
            edge_scores=scores.scores.tolist(),
            auroc=auroc,
            auprc=auprc,
            binarized_graph=graph.astype(int).tolist(),
            intervention_scores=iv.scores.tolist(),
            intervention_auroc=iv_auroc,
            node_level_calls=node_level_calls(iv, graph, rule).astype(int).tolist(),
            environment_calls=environment_calls(iv, rule).astype(int).tolist(),
            latent_alignment=alignment,
            thresholds={"edges": rule, "interventions": rule},
            warnings=warnings,
        )

    # ============================================
    # Cells
    # ============================================

    def _fit_cell(
        self,
        method: str,
        std: MultiEnvDataset,
        truth: GroundTruth,
        cfg: GenConfig,
        hp_overrides: Dict[str, object]
    ) -> BenchmarkCell:
        seed = cfg.seed
        warnings: List[str] = []
        with timed() as clock:
            if method == Method.VAR_LASSO.value:
                baseline = fit_var_lasso(std)
                auroc, auprc = None, None
                try:
                    auroc, auprc = evaluate_graph(baseline_edge_scores(baseline), truth.adjacency)
                except UndefinedMetricError as e:
                    warnings.append(f"graph metrics undefined: {e.message}")
                hyperparams: Dict[str, object] = {"lambda": baseline.lam}
                iv_auroc, latent_corr = None, None
            else:
                mode = FitMode.LINEAR if method != Method.INVARGC_NONLINEAR.value else FitMode.NONLINEAR
                overrides = {"n_latents": cfg.p, **hp_overrides}
                n_latents = int(overrides.pop("n_latents"))
                hp = HyperParams.defaults(std.n_steps, n_latents=n_latents, mode=mode, **overrides)
                if mode == FitMode.LINEAR:
                    result = fit_linear(std, hp, seed)
                else:
                    result = fit_nonlinear(std, hp, seed=seed)
                report = self.evaluate_fit(result, truth)
                auroc, auprc = report.auroc, report.auprc
                iv_auroc = report.intervention_auroc
                latent_corr = report.latent_alignment.mean_correlation if report.latent_alignment else None
                hyperparams = report.hyperparams
                warnings = list(report.warnings)

        return BenchmarkCell(
            method=method,
            mechanism=cfg.mechanism,
            seed=seed,
            status=CellStatus.OK,
            auroc=auroc,
            auprc=auprc,
            intervention_auroc=iv_auroc,
            latent_correlation=latent_corr,
            wall_time_seconds=clock["seconds"],
            hyperparams=to_jsonable(hyperparams),
            warnings=warnings,
        )

    def run_cell(
        self,
        method: str,
        std: MultiEnvDataset,
        truth: GroundTruth,
        cfg: GenConfig,
        hp_overrides: Optional[Dict[str, object]] = None
    ) -> BenchmarkCell:
        """One (method, seed) cell; failures are recorded, not raised"""
        try:
            return self._fit_cell(method, std, truth, cfg, dict(hp_overrides or {}))
        except (InvarGCError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            message = e.message if isinstance(e, InvarGCError) else str(e)
            logger.warning(
                f"Benchmark cell failed: {message}",
                extra={"seed": cfg.seed, "method": method,
                       "error_code": getattr(e, "error_code", type(e).__name__)},
            )
            return self._failed_cell(method, cfg, message)

    @staticmethod
    def _failed_cell(method: str, cfg: GenConfig, message: str) -> BenchmarkCell:
        return BenchmarkCell(
            method=method,
            mechanism=cfg.mechanism,
            seed=cfg.seed,
            status=CellStatus.FAILED,
            error=message,
        )

    # ============================================
    # Grids
    # ============================================

    def _run_grid(
        self,
        kind: str,
        cfg: GenConfig,
        n_seeds: int,
        methods: Sequence[str],
        overrides: Dict[str, Dict[str, object]],
        fitted_as: Dict[str, str]
    ) -> BenchmarkReport:
        seeds = [cfg.seed + s for s in range(n_seeds)]
        cells: List[BenchmarkCell] = []

        with timed() as clock:
            for seed in seeds:
                seed_cfg = cfg.model_copy(update={"seed": seed})
                try:
                    ds, truth = generate_benchmark(seed_cfg)
                except InvarGCError as e:
                    logger.warning(
                        f"{kind} seed={seed} could not be generated: {e.message}",
                        extra={"seed": seed, "error_code": e.error_code},
                    )
                    cells += [self._failed_cell(m, seed_cfg, e.message) for m in methods]
                    continue
                std = standardize(ds)
                for method in methods:
                    cell = self.run_cell(fitted_as.get(method, method), std, truth, seed_cfg, overrides.get(method))
                    cells.append(cell.model_copy(update={"method": method}))
                    logger.info(
                        f"{kind} cell {method} seed={seed}: {cell.status.value}",
                        extra={"seed": seed, "method": method,
                               "duration_ms": round(cell.wall_time_seconds * 1000, 1)},
                    )

        order = {m: n for n, m in enumerate(methods)}
        cells.sort(key=lambda c: (order[c.method], c.seed))
        return BenchmarkReport(
            kind=kind,
            version=__version__,
            config=cfg.model_dump(mode="json"),
            seeds=seeds,
            methods=list(methods),
            cells=cells,
            summaries=[self.summarize(m, cells) for m in methods],
            total_wall_time_seconds=clock["seconds"],
        )

    def run_benchmark(self, cfg: GenConfig, n_seeds: int, methods: Sequence[str]) -> BenchmarkReport:
        """Generate each seed once and run every method on it"""
        return self._run_grid("benchmark", cfg, n_seeds, [Method(m).value for m in methods], {}, {})

    def ablation_variants(self, p: int) -> List[str]:
        return [name for name in ABLATION_VARIANTS if name != "lcim-undercomplete" or p >= 2]

    def run_ablation(self, cfg: GenConfig, n_seeds: int) -> BenchmarkReport:
        """invargc-linear under every latent-module variant on shared datasets"""
        variants = self.ablation_variants(cfg.p)
        overrides: Dict[str, Dict[str, object]] = {}
        for name in variants:
            n_latents, lambda_z = ABLATION_VARIANTS[name](cfg.p)
            overrides[name] = {"n_latents": n_latents, "lambda_z": lambda_z}
        fitted_as = {name: Method.INVARGC_LINEAR.value for name in variants}
        return self._run_grid("ablation", cfg, n_seeds, variants, overrides, fitted_as)

    # ============================================
    # Summaries
    # ============================================

    @staticmethod
    def summarize(method: str, cells: Sequence[BenchmarkCell]) -> MethodSummary:
        """Mean and population sd over the method's successful cells"""
        ok = [c for c in cells if c.method == method and c.status == CellStatus.OK]
        failed = sum(1 for c in cells if c.method == method and c.status == CellStatus.FAILED)

        def values(field: str) -> List[float]:
            return [getattr(c, field) for c in ok if getattr(c, field) is not None]

        auroc_mean, auroc_sd = mean_sd(values("auroc"))
        auprc_mean, auprc_sd = mean_sd(values("auprc"))
        iv_mean, _ = mean_sd(values("intervention_auroc"))
        latent = values("latent_correlation")
        latent_mean, _ = mean_sd(latent)
        return MethodSummary(
            method=method,
            n_ok=len(ok),
            n_failed=failed,
            auroc_mean=auroc_mean,
            auroc_sd=auroc_sd,
            auprc_mean=auprc_mean,
            auprc_sd=auprc_sd,
            intervention_auroc_mean=iv_mean,
            latent_correlation_mean=latent_mean,
            latent_correlation_median=float(np.median(latent)) if latent else None,
        )

    @staticmethod
    def n_ok(report: BenchmarkReport) -> int:
        return sum(1 for c in report.cells if c.status == CellStatus.OK)

    def render_markdown(self, report: BenchmarkReport) -> str:
        """Markdown table with one row per method"""
        cfg = report.config
        lines = [
            f"# {report.kind.capitalize()} ({cfg.get('mechanism')}, d={cfg.get('d')}, p={cfg.get('p')}, "
            f"N={cfg.get('n_envs')}, T={cfg.get('T')})",
            "",
            f"Seeds: {', '.join(str(s) for s in report.seeds)}",
            "",
            "| Method | AUROC | AUPRC | Intervention AUROC | Latent corr. (median) | ok / failed |",
            "|---|---|---|---|---|---|",
        ]
        for s in report.summaries:
            iv = "n/a" if s.intervention_auroc_mean is None else f"{s.intervention_auroc_mean:.4f}"
            latent = "n/a" if s.latent_correlation_median is None else f"{s.latent_correlation_median:.4f}"
            lines.append(
                f"| {s.method} | {format_mean_sd(s.auroc_mean, s.auroc_sd)} | "
                f"{format_mean_sd(s.auprc_mean, s.auprc_sd)} | {iv} | {latent} | {s.n_ok} / {s.n_failed} |"
            )
        lines += ["", f"Total wall time: {report.total_wall_time_seconds:.1f} s", ""]
        return "\n".join(lines)


# Global service instance
benchmark_service = BenchmarkService()
