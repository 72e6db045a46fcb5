"""
Pooled lasso VAR(1) Granger baseline
"""

from typing import Optional

import numpy as np

from invargc.config import settings
from invargc.models.domain import BaselineModel, EdgeScores, MultiEnvDataset
from invargc.services.prox import soft_threshold
from invargc.utils.constants import Method
from invargc.utils.logger import logger

# Largest coordinate change of a converged sweep
SWEEP_TOLERANCE = 1e-8


def default_lambda(ds: MultiEnvDataset) -> float:
    """BASELINE_LAMBDA_SCALE times the pooled number of transitions"""
    return settings.BASELINE_LAMBDA_SCALE * ds.n_envs * (ds.n_steps - 1)


def pooled_design(ds: MultiEnvDataset):
    """Stack all environments: inputs and targets as (N * (T-1)) x d"""
    d = ds.n_vars
    x = ds.inputs.transpose(0, 2, 1).reshape(-1, d)
    y = ds.targets.transpose(0, 2, 1).reshape(-1, d)
    return x, y


def lasso_objective(coef: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    r = y - x @ coef.T
    return float(np.sum(r * r) + lam * np.sum(np.abs(coef)))


def fit_var_lasso(
    ds: MultiEnvDataset,
    lam: Optional[float] = None,
    max_sweeps: Optional[int] = None
) -> BaselineModel:
    """
    Cyclic coordinate descent on sum (X_{t+1} - B X_t)^2 + lam * sum |B|

    Columns of B are updated for all targets at once from the Gram matrix.

    Args:
        ds: Standardized dataset, environments pooled
        lam: Penalty (defaults to default_lambda(ds))
        max_sweeps: Cap on full sweeps

    Returns:
        BaselineModel with coef[i, j] the effect of j on target i
    """
    lam = default_lambda(ds) if lam is None else float(lam)
    max_sweeps = max_sweeps or settings.BASELINE_MAX_SWEEPS
    x, y = pooled_design(ds)
    gram = x.T @ x
    cross = y.T @ x
    d = ds.n_vars
    coef = np.zeros((d, d))

    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        largest = 0.0
        for j in range(d):
            g_jj = gram[j, j]
            old = coef[:, j].copy()
            if g_jj <= 0:
                coef[:, j] = 0.0
            else:
                rho = cross[:, j] - coef @ gram[:, j] + old * g_jj
                coef[:, j] = soft_threshold(rho, lam / 2.0) / g_jj
            largest = max(largest, float(np.max(np.abs(coef[:, j] - old))))
        if largest < SWEEP_TOLERANCE:
            break
    else:
        logger.warning(
            f"var-lasso stopped after {max_sweeps} sweeps without converging",
            extra={"method": Method.VAR_LASSO.value, "iteration": max_sweeps},
        )

    return BaselineModel(coef=coef, lam=lam, n_sweeps=sweeps)


def baseline_edge_scores(model: BaselineModel) -> EdgeScores:
    """scores[j, i] = |coef[i, j]|"""
    return EdgeScores(scores=np.abs(model.coef).T)
