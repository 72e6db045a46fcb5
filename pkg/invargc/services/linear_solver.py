"""
Linear invariant Granger solver

Squared one-step prediction error of
    X_{k,t+1} = W0 [X_{k,t}; Z_{k,t}] + Wk X_{k,t}
plus the hierarchical group penalty on (W0, Wk) and the RMS penalty on Z,
minimized by block proximal gradient descent with backtracking.
"""

from typing import List, Optional, Tuple

import numpy as np
from sklearn.decomposition import PCA

from invargc.config import settings
from invargc.models.domain import LinearModel, MultiEnvDataset
from invargc.models.schemas import FitResult, HyperParams
from invargc.services.prox import linear_penalty, prox_latents, prox_weights
from invargc.utils.constants import Z_INIT_JITTER, FitMode, Method, ZInit
from invargc.utils.error_handler import ConvergenceError, DivergenceError, ShapeMismatchError
from invargc.utils.helpers import make_rng, timed
from invargc.utils.logger import logger


def check_shapes(model: LinearModel, ds: MultiEnvDataset) -> None:
    """Raise ShapeMismatchError unless the model was built for this dataset"""
    expected = (ds.n_envs, ds.n_vars, ds.n_steps - 1)
    actual = (model.n_envs, model.n_vars, model.n_inputs)
    if expected != actual:
        raise ShapeMismatchError(
            "model does not match dataset (n_envs, n_vars, T-1)",
            details={"expected": list(expected), "actual": list(actual)},
        )


def predict(model: LinearModel, ds: MultiEnvDataset) -> np.ndarray:
    """One-step predictions, shape N x d x (T-1)"""
    check_shapes(model, ds)
    d = model.n_vars
    x = ds.inputs
    return (
        np.einsum("ij,kjt->kit", model.w0[:, :d], x)
        + np.einsum("il,klt->kit", model.w0[:, d:], model.z)
        + np.einsum("kij,kjt->kit", model.wk, x)
    )


def residuals(model: LinearModel, ds: MultiEnvDataset) -> np.ndarray:
    return ds.targets - predict(model, ds)


def squared_loss(model: LinearModel, ds: MultiEnvDataset) -> float:
    r = residuals(model, ds)
    return float(np.sum(r * r))


def objective(model: LinearModel, ds: MultiEnvDataset, hp: HyperParams) -> float:
    """Squared error plus the full penalty"""
    return squared_loss(model, ds) + linear_penalty(model, hp)


def smooth_gradient(model: LinearModel, ds: MultiEnvDataset) -> LinearModel:
    """
    Gradient of the squared-error term only

    Args:
        model: Current parameters
        ds: Dataset the model was built for

    Returns:
        LinearModel whose tensors hold d/dw0, d/dwk and d/dz
    """
    r = residuals(model, ds)
    d = model.n_vars
    x = ds.inputs

    grad_w0 = np.empty_like(model.w0)
    grad_w0[:, :d] = -2.0 * np.einsum("kit,kjt->ij", r, x)
    grad_w0[:, d:] = -2.0 * np.einsum("kit,klt->il", r, model.z)
    grad_wk = -2.0 * np.einsum("kit,kjt->kij", r, x)
    grad_z = -2.0 * np.einsum("il,kit->klt", model.w0[:, d:], r)
    return LinearModel(w0=grad_w0, wk=grad_wk, z=grad_z)


# ============================================
# Initialization
# ============================================

def initialize(ds: MultiEnvDataset, hp: HyperParams, seed: int) -> LinearModel:
    """
    Starting point of the solver

    W starts at zero. With residual-pca, Z holds unit-RMS principal component
    scores of the pooled OLS residuals and the latent columns of w0 the matching
    loadings; both modes add N(0, 0.01^2) jitter to Z.
    """
    n_envs, d, n_inputs = ds.n_envs, ds.n_vars, ds.n_steps - 1
    n_latents = hp.n_latents
    rng = make_rng(seed)

    model = LinearModel.zeros(n_envs, d, n_latents, n_inputs)
    jitter = rng.normal(0.0, Z_INIT_JITTER, size=(n_envs, n_latents, n_inputs))
    if n_latents == 0 or hp.z_init == ZInit.RANDOM:
        return model.with_tensors(z=jitter)

    x = ds.inputs.transpose(0, 2, 1).reshape(-1, d)
    y = ds.targets.transpose(0, 2, 1).reshape(-1, d)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef

    n_components = min(n_latents, d, resid.shape[0])
    pca = PCA(n_components=n_components, svd_solver="full")
    scores = pca.fit_transform(resid)
    scale = scores.std(axis=0)
    scale[scale == 0] = 1.0

    z_flat = np.zeros((resid.shape[0], n_latents))
    z_flat[:, :n_components] = scores / scale
    z = z_flat.reshape(n_envs, n_inputs, n_latents).transpose(0, 2, 1) + jitter

    w0 = np.zeros((d, d + n_latents))
    w0[:, d:d + n_components] = (pca.components_ * scale[:, None]).T
    return model.with_tensors(w0=w0, z=z)


# ============================================
# Optimizer
# ============================================

def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


class LinearSolver:
    """Block proximal gradient on (w0, wk) then z, each block with its own backtracking"""

    def __init__(self, ds: MultiEnvDataset, hp: HyperParams, max_backtracks: Optional[int] = None):
        self.ds = ds
        self.hp = hp
        self.max_backtracks = max_backtracks or settings.MAX_BACKTRACKS
        self.step_w = hp.step_init
        self.step_z = hp.step_init

    def _weight_step(self, model: LinearModel, iteration: int) -> LinearModel:
        hp = self.hp
        grad = smooth_gradient(model, self.ds)
        loss = squared_loss(model, self.ds)
        step = min(self.step_w / hp.backtrack, hp.step_init)

        for _ in range(self.max_backtracks):
            w0, wk = prox_weights(
                model.w0 - step * grad.w0, model.wk - step * grad.wk, step, hp.lambda_w, hp.alpha
            )
            candidate = LinearModel(w0=w0, wk=wk, z=model.z)
            dw0, dwk = w0 - model.w0, wk - model.wk
            bound = (
                loss
                + _inner(grad.w0, dw0) + _inner(grad.wk, dwk)
                + (_inner(dw0, dw0) + _inner(dwk, dwk)) / (2.0 * step)
            )
            if squared_loss(candidate, self.ds) <= bound + 1e-12 * max(1.0, abs(loss)):
                self.step_w = step
                return candidate
            step *= hp.backtrack
        raise ConvergenceError("line search on the weight block exhausted its backtracks", iteration)

    def _latent_step(self, model: LinearModel, iteration: int) -> LinearModel:
        hp = self.hp
        grad = smooth_gradient(model, self.ds)
        loss = squared_loss(model, self.ds)
        step = min(self.step_z / hp.backtrack, hp.step_init)

        for _ in range(self.max_backtracks):
            z = prox_latents(model.z - step * grad.z, step, hp.lambda_z)
            candidate = LinearModel(w0=model.w0, wk=model.wk, z=z)
            dz = z - model.z
            bound = loss + _inner(grad.z, dz) + _inner(dz, dz) / (2.0 * step)
            if squared_loss(candidate, self.ds) <= bound + 1e-12 * max(1.0, abs(loss)):
                self.step_z = step
                return candidate
            step *= hp.backtrack
        raise ConvergenceError("line search on the latent block exhausted its backtracks", iteration)

    def run(self, model: LinearModel, seed: int = 0) -> Tuple[LinearModel, List[float], int, bool]:
        """Iterate until the relative objective change drops below tol or max_iters"""
        hp = self.hp
        current = objective(model, self.ds, hp)
        if not np.isfinite(current):
            raise DivergenceError("non-finite objective at initialization", 0)
        trace = [current]
        converged = False
        iteration = 0

        for iteration in range(1, hp.max_iters + 1):
            model = self._weight_step(model, iteration)
            if model.n_latents > 0:
                model = self._latent_step(model, iteration)

            value = objective(model, self.ds, hp)
            if not np.isfinite(value):
                raise DivergenceError(f"non-finite objective at iteration {iteration}", iteration)
            trace.append(value)

            if iteration % 500 == 0:
                logger.debug(
                    f"linear iteration {iteration}: objective={value:.6g}",
                    extra={"seed": seed, "method": Method.INVARGC_LINEAR.value,
                           "iteration": iteration, "objective": value},
                )
            if abs(current - value) <= hp.tol * max(1.0, abs(current)):
                converged = True
                break
            current = value

        return model, trace, iteration, converged


def fit_linear(
    ds: MultiEnvDataset,
    hp: HyperParams,
    seed: int = 0,
    init: Optional[LinearModel] = None
) -> FitResult:
    """
    Fit the linear model

    Args:
        ds: Standardized dataset
        hp: Hyperparameters; n_latents sets the latent budget
        seed: Seed of the latent initialization
        init: Optional starting model (skips the initialization)

    Returns:
        FitResult with the fitted LinearModel and its non-increasing objective trace
    """
    model = init if init is not None else initialize(ds, hp, seed)
    check_shapes(model, ds)

    with timed() as clock:
        model, trace, n_iters, converged = LinearSolver(ds, hp).run(model, seed)

    logger.info(
        f"linear fit finished after {n_iters} iterations (converged={converged})",
        extra={"seed": seed, "method": Method.INVARGC_LINEAR.value, "iteration": n_iters,
               "objective": trace[-1], "duration_ms": round(clock["seconds"] * 1000, 1)},
    )
    return FitResult(
        mode=FitMode.LINEAR,
        model=model,
        trace=trace,
        n_iters=n_iters,
        converged=converged,
        hyperparams=hp,
    )
