"""
Pydantic schemas for configuration, hyperparameters and reports
"""

from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from invargc.config import settings
from invargc.models.domain import LinearModel, NonlinearModel
from invargc.utils.constants import (
    CellStatus,
    FitMode,
    InterventionKind,
    Mechanism,
    ThresholdKind,
    ZInit,
)


# ============================================
# Generator configuration
# ============================================

class GenConfig(BaseModel):
    """Synthetic benchmark configuration; field names are the JSON keys"""
    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    d: int = Field(default=5, ge=1)
    p: int = Field(default=1, ge=0)
    e: float = Field(default=0.3, ge=0.0, le=1.0)
    n_envs: int = Field(default=3, ge=1)
    n_intervened: int = Field(default=1, ge=0)
    T: int = Field(default=1000, ge=2)
    mechanism: Mechanism = Mechanism.LEAKY_RELU
    leaky_slope: float = Field(default=0.01, ge=0.0)
    intervention_kind: InterventionKind = InterventionKind.IMPERFECT_EDGE
    n_intervened_edges: int = Field(default=2, ge=0)
    coef_low: float = Field(default=0.3, gt=0.0)
    coef_high: float = Field(default=0.9, gt=0.0)
    noise_sd: float = Field(default=1.0, gt=0.0)
    burn_in: int = Field(default=200, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.n_intervened > self.n_envs:
            raise ValueError("n_intervened must not exceed n_envs")
        if self.coef_high < self.coef_low:
            raise ValueError("coef_high must be >= coef_low")
        return self


# ============================================
# Solver hyperparameters
# ============================================

class HyperParams(BaseModel):
    """Objective weights and optimizer settings shared by both solvers"""
    model_config = ConfigDict(extra="forbid")

    lambda_z: float = Field(..., ge=0.0)
    alpha: float = Field(..., gt=0.0, lt=1.0)
    lambda_w: float = Field(..., ge=0.0)
    n_latents: int = Field(..., ge=0)
    max_iters: int = Field(default=settings.MAX_ITERS, ge=1)
    tol: float = Field(default=settings.TOL, gt=0.0)
    step_init: float = Field(default=settings.STEP_INIT, gt=0.0)
    backtrack: float = Field(default=settings.BACKTRACK, gt=0.0, lt=1.0)
    z_init: ZInit = ZInit.RESIDUAL_PCA

    @classmethod
    def defaults(
        cls,
        n_steps: int,
        n_latents: int = 1,
        mode: FitMode = FitMode.LINEAR,
        **overrides: Any
    ) -> "HyperParams":
        """Defaults scaled to the series length; None overrides are ignored"""
        values: Dict[str, Any] = {
            "lambda_z": settings.LAMBDA_Z_SCALE * (n_steps - 1),
            "alpha": settings.ALPHA,
            "lambda_w": settings.LAMBDA_W_SCALE * (n_steps - 1),
            "n_latents": n_latents,
            "max_iters": settings.MAX_ITERS if mode == FitMode.LINEAR else settings.NONLINEAR_MAX_ITERS,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class NonlinearArch(BaseModel):
    """Network widths and optimizer settings of the nonlinear solver"""
    model_config = ConfigDict(extra="forbid")

    hidden: int = Field(default=settings.NONLINEAR_HIDDEN, ge=1)
    representation: int = Field(default=settings.NONLINEAR_REPR, ge=1)
    embed: int = Field(default=settings.NONLINEAR_EMBED, ge=1)
    learning_rate: float = Field(default=settings.NONLINEAR_LEARNING_RATE, gt=0.0)
    ridge: float = Field(default=settings.NONLINEAR_RIDGE, ge=0.0)
    leaky_slope: float = Field(default=0.01, ge=0.0)


class ThresholdRule(BaseModel):
    """Binarization rule: score > value (absolute) or score > value * max (relative)"""
    model_config = ConfigDict(extra="forbid")

    kind: ThresholdKind = ThresholdKind.RELATIVE
    value: float = Field(default=settings.THRESHOLD_FRACTION, ge=0.0)


# ============================================
# Fit results
# ============================================

class FitResult(BaseModel):
    """Fitted model with its objective trace"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mode: FitMode
    model: Union[LinearModel, NonlinearModel]
    trace: List[float]
    n_iters: int
    converged: bool
    hyperparams: HyperParams
    arch: Optional[NonlinearArch] = None

    @property
    def final_objective(self) -> float:
        return self.trace[-1]


# ============================================
# Reports
# ============================================

class EnvAlignment(BaseModel):
    """Alignment between learned and true latent trajectories of one environment"""
    env: int
    defined: bool
    n_active_latents: int
    principal_angles: Optional[List[float]] = None
    correlation: Optional[float] = None


class AlignmentReport(BaseModel):
    """Per-environment latent alignment with summaries over defined environments"""
    per_env: List[EnvAlignment]
    mean_correlation: Optional[float] = None
    median_correlation: Optional[float] = None


class EvalReport(BaseModel):
    """Content of report.json"""
    model_config = ConfigDict(extra="forbid")

    version: str
    mode: str
    hyperparams: Dict[str, Any] = Field(default_factory=dict)
    edge_scores: List[List[float]]
    auroc: Optional[float] = None
    auprc: Optional[float] = None
    binarized_graph: List[List[int]]
    intervention_scores: List[List[List[float]]]
    intervention_auroc: Optional[float] = None
    node_level_calls: List[List[int]]
    environment_calls: List[int]
    latent_alignment: Optional[AlignmentReport] = None
    thresholds: Dict[str, ThresholdRule]
    warnings: List[str] = Field(default_factory=list)


class BenchmarkCell(BaseModel):
    """One (method, seed) run"""
    method: str
    mechanism: Mechanism
    seed: int
    status: CellStatus
    auroc: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    auprc: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    intervention_auroc: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    latent_correlation: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    wall_time_seconds: float = 0.0
    hyperparams: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    error: Optional[str] = None

    @field_validator("latent_correlation", mode="before")
    @classmethod
    def _clip_correlation(cls, v):
        # rounding can push |r| a few ulps above 1
        return None if v is None else float(np.clip(v, 0.0, 1.0))


class MethodSummary(BaseModel):
    """Mean and population sd per method over successful seeds"""
    method: str
    n_ok: int
    n_failed: int
    auroc_mean: Optional[float] = None
    auroc_sd: Optional[float] = None
    auprc_mean: Optional[float] = None
    auprc_sd: Optional[float] = None
    intervention_auroc_mean: Optional[float] = None
    latent_correlation_mean: Optional[float] = None
    latent_correlation_median: Optional[float] = None


class BenchmarkReport(BaseModel):
    """Content of the benchmark/ablation JSON report"""
    kind: str = "benchmark"
    version: str
    config: Dict[str, Any]
    seeds: List[int]
    methods: List[str]
    cells: List[BenchmarkCell]
    summaries: List[MethodSummary]
    total_wall_time_seconds: float
