"""
Domain models: datasets, ground truth, fitted models and scores
"""

from typing import ClassVar, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from invargc.utils.helpers import as_readonly


class ArrayModel(BaseModel):
    """Immutable pydantic model holding numpy arrays"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, extra="forbid")


class TensorModel(ArrayModel):
    """Parameter container whose tensors can be combined elementwise"""
    TENSOR_FIELDS: ClassVar[Tuple[str, ...]] = ()

    def tensors(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.TENSOR_FIELDS}

    def with_tensors(self, **arrays: np.ndarray) -> "TensorModel":
        """New model with some tensors replaced (validated)"""
        data = self.model_dump()
        data.update(arrays)
        return type(self)(**data)

    def axpy(self, other: "TensorModel", scale: float) -> "TensorModel":
        """self + scale * other, tensor by tensor"""
        mine, theirs = self.tensors(), other.tensors()
        return self.with_tensors(**{k: mine[k] + scale * theirs[k] for k in mine})

    def scaled(self, factor: float) -> "TensorModel":
        return self.with_tensors(**{k: factor * v for k, v in self.tensors().items()})

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(v))) for v in self.tensors().values())


# ============================================
# Data
# ============================================

class MultiEnvDataset(ArrayModel):
    """N environments of d-variable, T-step series; series[k, i, t]"""

    series: np.ndarray
    var_names: List[str]

    @field_validator("series", mode="before")
    @classmethod
    def _coerce_series(cls, v):
        return as_readonly(v)

    @model_validator(mode="after")
    def _check_invariants(self):
        s = self.series
        if s.ndim != 3:
            raise ValueError(f"series must be N x d x T, got {s.ndim} dimensions")
        n_envs, n_vars, n_steps = s.shape
        if n_envs < 1 or n_vars < 1:
            raise ValueError("series needs at least one environment and one variable")
        if n_steps < 2:
            raise ValueError("series needs at least 2 time steps")
        if not np.all(np.isfinite(s)):
            raise ValueError("series contains non-finite values")
        if len(self.var_names) != n_vars:
            raise ValueError(f"{len(self.var_names)} var_names for {n_vars} variables")
        return self

    @classmethod
    def from_array(cls, series: np.ndarray, var_names: Optional[List[str]] = None) -> "MultiEnvDataset":
        series = np.asarray(series, dtype=float)
        names = var_names if var_names is not None else [f"x{i}" for i in range(series.shape[1])]
        return cls(series=series, var_names=names)

    @property
    def n_envs(self) -> int:
        return self.series.shape[0]

    @property
    def n_vars(self) -> int:
        return self.series.shape[1]

    @property
    def n_steps(self) -> int:
        return self.series.shape[2]

    @property
    def inputs(self) -> np.ndarray:
        """X_{k,t} at input positions t = 0..T-2, shape N x d x (T-1)"""
        return self.series[:, :, :-1]

    @property
    def targets(self) -> np.ndarray:
        """X_{k,t+1}, shape N x d x (T-1)"""
        return self.series[:, :, 1:]


class GraphSkeleton(ArrayModel):
    """Graph, invariant weights and latent wiring; orientation (source j, target i)"""

    adjacency: np.ndarray
    base_weights: np.ndarray
    latent_children: List[List[int]] = Field(default_factory=list)
    latent_dynamics: np.ndarray
    latent_to_obs: np.ndarray
    obs_weights: Optional[np.ndarray] = None
    intervention_mask: Optional[np.ndarray] = None

    @field_validator("base_weights", "latent_dynamics", "latent_to_obs", mode="before")
    @classmethod
    def _coerce_float(cls, v):
        return as_readonly(v)

    @field_validator("obs_weights", mode="before")
    @classmethod
    def _coerce_optional_float(cls, v):
        return None if v is None else as_readonly(v)

    @field_validator("adjacency", mode="before")
    @classmethod
    def _coerce_adjacency(cls, v):
        return as_readonly(v, dtype=np.int8)

    @field_validator("intervention_mask", mode="before")
    @classmethod
    def _coerce_mask(cls, v):
        return None if v is None else as_readonly(v, dtype=np.int8)

    @model_validator(mode="after")
    def _check_shapes(self):
        d = self.adjacency.shape[0]
        p = self.latent_dynamics.shape[0]
        if self.adjacency.shape != (d, d) or self.base_weights.shape != (d, d):
            raise ValueError("adjacency and base_weights must be d x d")
        if self.latent_dynamics.shape != (p, p):
            raise ValueError("latent_dynamics must be p x p")
        if self.latent_to_obs.shape != (p, d):
            raise ValueError(f"latent_to_obs must be {p} x {d}")
        if not np.array_equal(self.latent_dynamics, np.diag(np.diag(self.latent_dynamics))):
            raise ValueError("latent_dynamics must be diagonal")
        if len(self.latent_children) != p:
            raise ValueError("latent_children needs one entry per latent")
        if self.obs_weights is not None:
            if self.obs_weights.ndim != 3 or self.obs_weights.shape[1:] != (d, d):
                raise ValueError("obs_weights must be N x d x d")
        if self.intervention_mask is not None:
            if self.obs_weights is None or self.intervention_mask.shape != self.obs_weights.shape:
                raise ValueError("intervention_mask must match obs_weights")
        return self

    @property
    def n_vars(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_latents(self) -> int:
        return self.latent_dynamics.shape[0]

    def deviation_mask(self) -> np.ndarray:
        """Entries whose environment weight differs from the invariant weight"""
        if self.obs_weights is None:
            raise ValueError("no per-environment weights")
        return (self.obs_weights != self.base_weights[None, :, :]).astype(np.int8)


class GroundTruth(GraphSkeleton):
    """Complete generator state including latent trajectories"""

    obs_weights: np.ndarray
    intervention_mask: np.ndarray
    latent_series: np.ndarray

    @field_validator("latent_series", mode="before")
    @classmethod
    def _coerce_latent_series(cls, v):
        return as_readonly(v)

    @model_validator(mode="after")
    def _check_latent_series(self):
        n_envs = self.obs_weights.shape[0]
        if self.latent_series.ndim != 3 or self.latent_series.shape[:2] != (n_envs, self.n_latents):
            raise ValueError(f"latent_series must be {n_envs} x {self.n_latents} x T")
        return self

    @property
    def n_envs(self) -> int:
        return self.obs_weights.shape[0]


# ============================================
# Fitted models
# ============================================

class LinearModel(TensorModel):
    """Linear parameters: w0 (d x (d+p)), wk (N x d x d), z (N x p x (T-1)); rows index targets"""
    TENSOR_FIELDS: ClassVar[Tuple[str, ...]] = ("w0", "wk", "z")

    w0: np.ndarray
    wk: np.ndarray
    z: np.ndarray

    @field_validator("w0", "wk", "z", mode="before")
    @classmethod
    def _coerce(cls, v):
        return as_readonly(v)

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.w0.ndim != 2 or self.wk.ndim != 3 or self.z.ndim != 3:
            raise ValueError("w0 must be 2-D, wk and z 3-D")
        d = self.w0.shape[0]
        p = self.w0.shape[1] - d
        if p < 0 or self.wk.shape[1:] != (d, d):
            raise ValueError(f"wk must be N x {d} x {d} and w0 d x (d+p)")
        if self.z.shape[:2] != (self.wk.shape[0], p):
            raise ValueError(f"z must be {self.wk.shape[0]} x {p} x (T-1)")
        return self

    @property
    def n_vars(self) -> int:
        return self.w0.shape[0]

    @property
    def n_latents(self) -> int:
        return self.w0.shape[1] - self.w0.shape[0]

    @property
    def n_envs(self) -> int:
        return self.wk.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.z.shape[2]

    @classmethod
    def zeros(cls, n_envs: int, n_vars: int, n_latents: int, n_inputs: int) -> "LinearModel":
        return cls(
            w0=np.zeros((n_vars, n_vars + n_latents)),
            wk=np.zeros((n_envs, n_vars, n_vars)),
            z=np.zeros((n_envs, n_latents, n_inputs)),
        )


class NonlinearModel(TensorModel):
    """
    Per-target networks, batched over the target axis i.

    f: f_first (d, h, d+p) -> leaky -> f_hidden (d, h, h) -> leaky -> f_out (d, hc, h)
    g: g_first (N, d, h, d) -> leaky -> g_hidden (N, d, h, h) -> leaky -> g_out (N, d, hc, h)
    aggregator: agg_hidden (d, he, 2hc) applied to [H; C] -> tanh -> agg_out (d, he) -> scalar
    """
    TENSOR_FIELDS: ClassVar[Tuple[str, ...]] = (
        "f_first", "f_first_bias", "f_hidden", "f_hidden_bias", "f_out", "f_out_bias",
        "g_first", "g_first_bias", "g_hidden", "g_hidden_bias", "g_out", "g_out_bias",
        "agg_hidden", "agg_hidden_bias", "agg_out", "agg_out_bias", "z",
    )
    # Weights receiving the ridge decay
    DEEP_FIELDS: ClassVar[Tuple[str, ...]] = (
        "f_hidden", "f_out", "g_hidden", "g_out", "agg_hidden", "agg_out",
    )

    f_first: np.ndarray
    f_first_bias: np.ndarray
    f_hidden: np.ndarray
    f_hidden_bias: np.ndarray
    f_out: np.ndarray
    f_out_bias: np.ndarray
    g_first: np.ndarray
    g_first_bias: np.ndarray
    g_hidden: np.ndarray
    g_hidden_bias: np.ndarray
    g_out: np.ndarray
    g_out_bias: np.ndarray
    agg_hidden: np.ndarray
    agg_hidden_bias: np.ndarray
    agg_out: np.ndarray
    agg_out_bias: np.ndarray
    z: np.ndarray
    leaky_slope: float = 0.01

    @field_validator(*TENSOR_FIELDS, mode="before")
    @classmethod
    def _coerce(cls, v):
        return as_readonly(v)

    @model_validator(mode="after")
    def _check_shapes(self):
        d, h, q = self.f_first.shape
        n_envs = self.g_first.shape[0]
        hc = self.f_out.shape[1]
        he = self.agg_hidden.shape[1]
        expected = {
            "f_first_bias": (d, h), "f_hidden": (d, h, h), "f_hidden_bias": (d, h),
            "f_out": (d, hc, h), "f_out_bias": (d, hc),
            "g_first": (n_envs, d, h, d), "g_first_bias": (n_envs, d, h),
            "g_hidden": (n_envs, d, h, h), "g_hidden_bias": (n_envs, d, h),
            "g_out": (n_envs, d, hc, h), "g_out_bias": (n_envs, d, hc),
            "agg_hidden": (d, he, 2 * hc), "agg_hidden_bias": (d, he),
            "agg_out": (d, he), "agg_out_bias": (d,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {getattr(self, name).shape}")
        if q < d or self.z.ndim != 3 or self.z.shape[:2] != (n_envs, q - d):
            raise ValueError(f"z must be {n_envs} x {q - d} x (T-1)")
        return self

    @property
    def n_vars(self) -> int:
        return self.f_first.shape[0]

    @property
    def n_latents(self) -> int:
        return self.f_first.shape[2] - self.f_first.shape[0]

    @property
    def n_envs(self) -> int:
        return self.g_first.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.z.shape[2]

    @property
    def dims(self) -> Dict[str, int]:
        return {
            "hidden": self.f_first.shape[1],
            "representation": self.f_out.shape[1],
            "embed": self.agg_hidden.shape[1],
        }


class BaselineModel(ArrayModel):
    """Pooled VAR(1) lasso; coef[i, j] is the effect of j on target i"""

    coef: np.ndarray
    lam: float = Field(ge=0)
    n_sweeps: int = 0

    @field_validator("coef", mode="before")
    @classmethod
    def _coerce(cls, v):
        return as_readonly(v)

    @model_validator(mode="after")
    def _check(self):
        if self.coef.ndim != 2 or self.coef.shape[0] != self.coef.shape[1]:
            raise ValueError("coef must be d x d")
        if not np.all(np.isfinite(self.coef)):
            raise ValueError("coef contains non-finite values")
        return self


# ============================================
# Scores
# ============================================

class EdgeScores(ArrayModel):
    """scores[j, i] = strength of j -> i"""

    scores: np.ndarray

    @field_validator("scores", mode="before")
    @classmethod
    def _coerce(cls, v):
        return as_readonly(v)

    @model_validator(mode="after")
    def _check(self):
        if self.scores.ndim != 2 or self.scores.shape[0] != self.scores.shape[1]:
            raise ValueError("edge scores must be d x d")
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise ValueError("edge scores must be finite and non-negative")
        return self


class ScoredLabels(ArrayModel):
    """Flattened scores with binary labels of equal length"""

    scores: np.ndarray
    labels: np.ndarray

    @field_validator("scores", mode="before")
    @classmethod
    def _coerce_scores(cls, v):
        return as_readonly(np.ravel(np.asarray(v, dtype=float)))

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, v):
        return as_readonly(np.ravel(np.asarray(v)), dtype=np.int8)

    @model_validator(mode="after")
    def _check(self):
        if self.scores.size == 0 or self.scores.shape != self.labels.shape:
            raise ValueError("scores and labels must be non-empty and of equal length")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")
        return self

    @classmethod
    def of(cls, scores, labels) -> "ScoredLabels":
        return cls(scores=scores, labels=labels)

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return int(self.labels.size - self.labels.sum())


class InterventionScores(ArrayModel):
    """scores[k, j, i] = evidence that edge j -> i is intervened in environment k"""

    scores: np.ndarray

    @field_validator("scores", mode="before")
    @classmethod
    def _coerce(cls, v):
        return as_readonly(v)

    @model_validator(mode="after")
    def _check(self):
        if self.scores.ndim != 3 or self.scores.shape[1] != self.scores.shape[2]:
            raise ValueError("intervention scores must be N x d x d")
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise ValueError("intervention scores must be finite and non-negative")
        return self
