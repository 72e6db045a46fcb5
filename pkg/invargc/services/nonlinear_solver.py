"""
Nonlinear invariant Granger solver

Per target i an invariant network f_i over [X; Z], per (environment k, target i)
a network g_{k,i} over X, and an aggregator mapping [H; C] to the scalar
prediction. All networks are evaluated batched over (k, i, t) with einsum, and
gradients are back-propagated by hand.
"""

from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from invargc.models.domain import MultiEnvDataset, NonlinearModel
from invargc.models.schemas import FitResult, HyperParams, NonlinearArch
from invargc.services.linear_solver import initialize as initialize_linear
from invargc.services.prox import nonlinear_penalty, prox_nonlinear
from invargc.utils.constants import FitMode, Method
from invargc.utils.error_handler import DivergenceError, ShapeMismatchError
from invargc.utils.helpers import leaky_relu, leaky_relu_grad, make_rng, timed
from invargc.utils.logger import logger

# Learning-rate schedule
STEP_SHRINK = 0.5
STEP_RECOVER = 1.05
MIN_STEP_FRACTION = 1e-12
# convergence is only reported for a step taken at a healthy rate
MIN_CONVERGED_FRACTION = 1e-2


class ForwardCache(NamedTuple):
    """Intermediate activations kept for the backward pass"""
    p_in: np.ndarray
    a1: np.ndarray
    h1: np.ndarray
    a2: np.ndarray
    h2: np.ndarray
    b1: np.ndarray
    u1: np.ndarray
    b2: np.ndarray
    u2: np.ndarray
    stacked: np.ndarray
    embed: np.ndarray
    prediction: np.ndarray


def check_shapes(model: NonlinearModel, ds: MultiEnvDataset) -> None:
    expected = (ds.n_envs, ds.n_vars, ds.n_steps - 1)
    actual = (model.n_envs, model.n_vars, model.n_inputs)
    if expected != actual:
        raise ShapeMismatchError(
            "model does not match dataset (n_envs, n_vars, T-1)",
            details={"expected": list(expected), "actual": list(actual)},
        )


# ============================================
# Forward
# ============================================

def forward_batch(model: NonlinearModel, x: np.ndarray, z: np.ndarray) -> ForwardCache:
    """
    Evaluate every network on inputs x (N x d x n) and latents z (N x p x n)

    Returns:
        ForwardCache whose `prediction` has shape N x d x n
    """
    slope = model.leaky_slope
    p_in = np.concatenate([x, z], axis=1)

    a1 = np.einsum("ihq,kqt->kiht", model.f_first, p_in) + model.f_first_bias[None, :, :, None]
    h1 = leaky_relu(a1, slope)
    a2 = np.einsum("ihm,kimt->kiht", model.f_hidden, h1) + model.f_hidden_bias[None, :, :, None]
    h2 = leaky_relu(a2, slope)
    c = np.einsum("icm,kimt->kict", model.f_out, h2) + model.f_out_bias[None, :, :, None]

    b1 = np.einsum("kihj,kjt->kiht", model.g_first, x) + model.g_first_bias[:, :, :, None]
    u1 = leaky_relu(b1, slope)
    b2 = np.einsum("kihm,kimt->kiht", model.g_hidden, u1) + model.g_hidden_bias[:, :, :, None]
    u2 = leaky_relu(b2, slope)
    h = np.einsum("kicm,kimt->kict", model.g_out, u2) + model.g_out_bias[:, :, :, None]

    stacked = np.concatenate([h, c], axis=2)
    embed = np.tanh(
        np.einsum("iec,kict->kiet", model.agg_hidden, stacked) + model.agg_hidden_bias[None, :, :, None]
    )
    prediction = np.einsum("ie,kiet->kit", model.agg_out, embed) + model.agg_out_bias[None, :, None]
    return ForwardCache(p_in, a1, h1, a2, h2, b1, u1, b2, u2, stacked, embed, prediction)


def predict(model: NonlinearModel, ds: MultiEnvDataset) -> np.ndarray:
    """One-step predictions, shape N x d x (T-1)"""
    check_shapes(model, ds)
    return forward_batch(model, ds.inputs, model.z).prediction


def forward(model: NonlinearModel, ds: MultiEnvDataset, k: int, t: int) -> np.ndarray:
    """d predictions of X_{k,t+1} from input position t"""
    check_shapes(model, ds)
    if not 0 <= t < model.n_inputs:
        raise ShapeMismatchError(f"input position {t} outside 0..{model.n_inputs - 1}")
    cache = forward_batch(model, ds.inputs[:, :, t:t + 1], model.z[:, :, t:t + 1])
    return cache.prediction[k, :, 0]


# ============================================
# Objective and backward
# ============================================

def squared_loss(model: NonlinearModel, ds: MultiEnvDataset) -> float:
    r = ds.targets - predict(model, ds)
    return float(np.sum(r * r))


def ridge_penalty(model: NonlinearModel, ridge: float) -> float:
    return float(ridge * sum(np.sum(getattr(model, name) ** 2) for name in NonlinearModel.DEEP_FIELDS))


def objective(model: NonlinearModel, ds: MultiEnvDataset, hp: HyperParams, ridge: float = 0.0) -> float:
    """Squared error + ridge on deep layers + group and latent penalties"""
    return squared_loss(model, ds) + ridge_penalty(model, ridge) + nonlinear_penalty(model, hp)


def backward(model: NonlinearModel, ds: MultiEnvDataset, ridge: float = 0.0) -> NonlinearModel:
    """
    Reverse-mode gradients of the squared error (plus the deep-layer ridge if ridge > 0)

    Args:
        model: Current parameters
        ds: Dataset the model was built for
        ridge: Ridge weight of the deep layers

    Returns:
        NonlinearModel holding the gradient of every tensor
    """
    check_shapes(model, ds)
    d = model.n_vars
    hc = model.f_out.shape[1]
    slope = model.leaky_slope
    x = ds.inputs
    cache = forward_batch(model, x, model.z)
    g = -2.0 * (ds.targets - cache.prediction)

    grads: Dict[str, np.ndarray] = {}

    # aggregator
    grads["agg_out"] = np.einsum("kit,kiet->ie", g, cache.embed)
    grads["agg_out_bias"] = g.sum(axis=(0, 2))
    d_embed = np.einsum("kit,ie->kiet", g, model.agg_out) * (1.0 - cache.embed ** 2)
    grads["agg_hidden"] = np.einsum("kiet,kict->iec", d_embed, cache.stacked)
    grads["agg_hidden_bias"] = d_embed.sum(axis=(0, 3))
    d_stacked = np.einsum("kiet,iec->kict", d_embed, model.agg_hidden)
    d_h, d_c = d_stacked[:, :, :hc], d_stacked[:, :, hc:]

    # environment networks
    grads["g_out"] = np.einsum("kict,kimt->kicm", d_h, cache.u2)
    grads["g_out_bias"] = d_h.sum(axis=3)
    d_b2 = np.einsum("kict,kicm->kimt", d_h, model.g_out) * leaky_relu_grad(cache.b2, slope)
    grads["g_hidden"] = np.einsum("kiht,kimt->kihm", d_b2, cache.u1)
    grads["g_hidden_bias"] = d_b2.sum(axis=3)
    d_b1 = np.einsum("kiht,kihm->kimt", d_b2, model.g_hidden) * leaky_relu_grad(cache.b1, slope)
    grads["g_first"] = np.einsum("kiht,kjt->kihj", d_b1, x)
    grads["g_first_bias"] = d_b1.sum(axis=3)

    # invariant networks
    grads["f_out"] = np.einsum("kict,kimt->icm", d_c, cache.h2)
    grads["f_out_bias"] = d_c.sum(axis=(0, 3))
    d_a2 = np.einsum("kict,icm->kimt", d_c, model.f_out) * leaky_relu_grad(cache.a2, slope)
    grads["f_hidden"] = np.einsum("kiht,kimt->ihm", d_a2, cache.h1)
    grads["f_hidden_bias"] = d_a2.sum(axis=(0, 3))
    d_a1 = np.einsum("kiht,ihm->kimt", d_a2, model.f_hidden) * leaky_relu_grad(cache.a1, slope)
    grads["f_first"] = np.einsum("kiht,kqt->ihq", d_a1, cache.p_in)
    grads["f_first_bias"] = d_a1.sum(axis=(0, 3))
    grads["z"] = np.einsum("kiht,ihq->kqt", d_a1, model.f_first)[:, d:, :]

    if ridge > 0:
        for name in NonlinearModel.DEEP_FIELDS:
            grads[name] = grads[name] + 2.0 * ridge * getattr(model, name)

    return model.with_tensors(**grads)


# ============================================
# Initialization and fitting
# ============================================

def init_model(ds: MultiEnvDataset, hp: HyperParams, arch: NonlinearArch, seed: int) -> NonlinearModel:
    """
    Random weights scaled by 1/sqrt(fan_in), zero biases, g_first at zero

    z follows the linear solver's latent initialization.
    """
    n_envs, d = ds.n_envs, ds.n_vars
    q = d + hp.n_latents
    h, hc, he = arch.hidden, arch.representation, arch.embed
    rng = make_rng(seed)

    def draw(shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)

    z = initialize_linear(ds, hp, seed).z
    return NonlinearModel(
        f_first=draw((d, h, q), q),
        f_first_bias=np.zeros((d, h)),
        f_hidden=draw((d, h, h), h),
        f_hidden_bias=np.zeros((d, h)),
        f_out=draw((d, hc, h), h),
        f_out_bias=np.zeros((d, hc)),
        g_first=np.zeros((n_envs, d, h, d)),
        g_first_bias=np.zeros((n_envs, d, h)),
        g_hidden=draw((n_envs, d, h, h), h),
        g_hidden_bias=np.zeros((n_envs, d, h)),
        g_out=draw((n_envs, d, hc, h), h),
        g_out_bias=np.zeros((n_envs, d, hc)),
        agg_hidden=draw((d, he, 2 * hc), 2 * hc),
        agg_hidden_bias=np.zeros((d, he)),
        agg_out=draw((d, he), he),
        agg_out_bias=np.zeros(d),
        z=z,
        leaky_slope=arch.leaky_slope,
    )


def fit_nonlinear(
    ds: MultiEnvDataset,
    hp: HyperParams,
    arch: Optional[NonlinearArch] = None,
    seed: int = 0,
    init: Optional[NonlinearModel] = None
) -> FitResult:
    """
    Proximal full-batch gradient descent on the nonlinear objective

    A step that increases the objective is rejected and the learning rate halved;
    accepted steps let the rate recover by 5% up to its initial value.

    Args:
        ds: Standardized dataset
        hp: Hyperparameters
        arch: Network widths and optimizer settings
        seed: Seed of the weight and latent initialization
        init: Optional starting model

    Returns:
        FitResult with the fitted NonlinearModel and the objective of every accepted iterate
    """
    arch = arch or NonlinearArch()
    model = init if init is not None else init_model(ds, hp, arch, seed)
    check_shapes(model, ds)

    lr_init = arch.learning_rate
    lr = lr_init
    current = objective(model, ds, hp, arch.ridge)
    if not np.isfinite(current):
        raise DivergenceError("non-finite objective at initialization", 0)
    trace = [current]
    converged = False
    iteration = 0

    with timed() as clock:
        for iteration in range(1, hp.max_iters + 1):
            grads = backward(model, ds, arch.ridge)
            candidate = prox_nonlinear(model.axpy(grads, -lr), lr, hp)
            value = objective(candidate, ds, hp, arch.ridge)
            if not np.isfinite(value):
                raise DivergenceError(f"non-finite objective at iteration {iteration}", iteration)

            if value > current:
                lr *= STEP_SHRINK
                if lr < MIN_STEP_FRACTION * lr_init:
                    logger.warning(
                        "nonlinear step size collapsed; stopping",
                        extra={"seed": seed, "method": Method.INVARGC_NONLINEAR.value, "iteration": iteration},
                    )
                    break
                continue

            model = candidate
            trace.append(value)
            step_lr = lr
            lr = min(lr * STEP_RECOVER, lr_init)

            if iteration % 500 == 0:
                logger.debug(
                    f"nonlinear iteration {iteration}: objective={value:.6g}",
                    extra={"seed": seed, "method": Method.INVARGC_NONLINEAR.value,
                           "iteration": iteration, "objective": value},
                )
            stalled = abs(current - value) <= hp.tol * max(1.0, abs(current))
            if stalled and step_lr >= MIN_CONVERGED_FRACTION * lr_init:
                converged = True
                current = value
                break
            current = value

    logger.info(
        f"nonlinear fit finished after {iteration} iterations (converged={converged})",
        extra={"seed": seed, "method": Method.INVARGC_NONLINEAR.value, "iteration": iteration,
               "objective": trace[-1], "duration_ms": round(clock["seconds"] * 1000, 1)},
    )
    return FitResult(
        mode=FitMode.NONLINEAR,
        model=model,
        trace=trace,
        n_iters=iteration,
        converged=converged,
        hyperparams=hp,
        arch=arch,
    )
