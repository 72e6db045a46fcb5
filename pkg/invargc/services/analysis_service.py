"""
Graph, intervention and latent diagnostics extracted from fitted models
"""

from typing import List, Optional, Union

import numpy as np
from scipy.linalg import subspace_angles

from invargc.models.domain import EdgeScores, InterventionScores, LinearModel, NonlinearModel
from invargc.models.schemas import AlignmentReport, EnvAlignment, ThresholdRule
from invargc.services.prox import nonlinear_group_norms
from invargc.utils.constants import ThresholdKind
from invargc.utils.error_handler import ShapeMismatchError

FittedModel = Union[LinearModel, NonlinearModel]

# Relative variance below which a centred trajectory counts as constant
ZERO_VARIANCE = 1e-12


def edge_scores(model: FittedModel) -> EdgeScores:
    """
    Group norm of every observed input j for every target i

    Returns:
        EdgeScores with scores[j, i] for the edge j -> i
    """
    d = model.n_vars
    if isinstance(model, LinearModel):
        norms = np.sqrt(model.w0[:, :d] ** 2 + np.sum(model.wk ** 2, axis=0))
    else:
        norms = nonlinear_group_norms(model.f_first, model.g_first)[:, :d]
    return EdgeScores(scores=norms.T)


def intervention_scores(model: FittedModel) -> InterventionScores:
    """scores[k, j, i]: |wk[k, i, j]| (linear) or the norm of g_first column j of (k, i)"""
    if isinstance(model, LinearModel):
        per_target = np.abs(model.wk)
    else:
        per_target = np.sqrt(np.sum(model.g_first ** 2, axis=2))
    return InterventionScores(scores=per_target.transpose(0, 2, 1))


def binarize(scores: np.ndarray, rule: Optional[ThresholdRule] = None) -> np.ndarray:
    """1 where score > value (absolute) or score > value * max(scores) (relative)"""
    rule = rule or ThresholdRule()
    scores = np.asarray(scores, dtype=float)
    if rule.kind == ThresholdKind.ABSOLUTE:
        threshold = rule.value
    else:
        threshold = rule.value * (float(scores.max()) if scores.size else 0.0)
    return (scores > threshold).astype(np.int8)


def node_level_calls(
    iv: InterventionScores,
    graph: np.ndarray,
    rule: Optional[ThresholdRule] = None
) -> np.ndarray:
    """
    Node-level intervention calls, shape N x d

    Entry (k, i) is 1 iff the flagged intervened parents of i in environment k
    are exactly the non-empty discovered parent set of i.
    """
    flagged = binarize(iv.scores, rule) == 1
    parents = np.asarray(graph) == 1
    if flagged.shape[1:] != parents.shape:
        raise ShapeMismatchError(
            "intervention scores and graph disagree on d",
            details={"iv": list(flagged.shape), "graph": list(parents.shape)},
        )
    same = np.all(flagged == parents[None, :, :], axis=1)
    has_parents = parents.any(axis=0)
    return (same & has_parents[None, :]).astype(np.int8)


def environment_calls(iv: InterventionScores, rule: Optional[ThresholdRule] = None) -> np.ndarray:
    """1 for every environment with at least one flagged intervened edge"""
    return binarize(iv.scores, rule).any(axis=(1, 2)).astype(np.int8)


# ============================================
# Latent alignment
# ============================================

def _active_columns(matrix: np.ndarray) -> np.ndarray:
    variance = matrix.var(axis=0)
    scale = max(float(np.max(np.abs(matrix))) ** 2, 1.0) if matrix.size else 1.0
    return variance > ZERO_VARIANCE * scale


def _best_correlation(learned: np.ndarray, target: np.ndarray) -> float:
    """|Pearson r| between target and its least-squares fit from the learned columns"""
    coef, *_ = np.linalg.lstsq(learned, target, rcond=None)
    fitted = learned @ coef
    denom = np.linalg.norm(fitted) * np.linalg.norm(target)
    if denom == 0:
        return 0.0
    return float(min(abs(fitted @ target) / denom, 1.0))


def align_environment(k: int, learned: np.ndarray, true: np.ndarray) -> EnvAlignment:
    """Alignment of one environment; inputs are time x latent"""
    learned = learned - learned.mean(axis=0)
    true = true - true.mean(axis=0)
    active = _active_columns(learned)
    n_active = int(active.sum())

    if n_active == 0 or true.shape[1] == 0 or not np.all(_active_columns(true)):
        return EnvAlignment(env=k, defined=False, n_active_latents=n_active)

    basis = learned[:, active]
    angles = subspace_angles(basis, true)
    correlations = [_best_correlation(basis, true[:, r]) for r in range(true.shape[1])]
    return EnvAlignment(
        env=k,
        defined=True,
        n_active_latents=n_active,
        principal_angles=[float(a) for a in angles],
        correlation=float(np.mean(correlations)),
    )


def latent_alignment(model_z: np.ndarray, true_z: np.ndarray) -> AlignmentReport:
    """
    Principal angles and best correlation between learned and true latent spans

    Args:
        model_z: N x p x n learned trajectories
        true_z: N x r x n true trajectories at the same input positions

    Returns:
        AlignmentReport; environments with no active learned latent or a constant
        true trajectory are flagged undefined
    """
    model_z = np.asarray(model_z, dtype=float)
    true_z = np.asarray(true_z, dtype=float)
    if model_z.shape[0] != true_z.shape[0] or model_z.shape[2] != true_z.shape[2]:
        raise ShapeMismatchError(
            "learned and true latent trajectories disagree on N or length",
            details={"model_z": list(model_z.shape), "true_z": list(true_z.shape)},
        )

    per_env: List[EnvAlignment] = [
        align_environment(k, model_z[k].T, true_z[k].T) for k in range(model_z.shape[0])
    ]
    defined = [e.correlation for e in per_env if e.defined]
    return AlignmentReport(
        per_env=per_env,
        mean_correlation=float(np.mean(defined)) if defined else None,
        median_correlation=float(np.median(defined)) if defined else None,
    )
