"""
Proximal operators of the hierarchical group penalty

Inner groups (one coefficient or one first-layer column per environment) nest
inside the outer groups (one input j of one target i across all environments),
so the prox of the sum is the inner prox followed by the outer prox.
"""

from typing import Tuple

import numpy as np

from invargc.models.domain import LinearModel, NonlinearModel
from invargc.models.schemas import HyperParams


def soft_threshold(x: np.ndarray, threshold: float) -> np.ndarray:
    """Elementwise sign(x) * max(|x| - threshold, 0)"""
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def group_shrink_factor(norms: np.ndarray, threshold: float) -> np.ndarray:
    """max(1 - threshold / norm, 0), exactly 0 for zero norms"""
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > threshold, 1.0 - threshold / safe, 0.0)


def group_soft_threshold(v: np.ndarray, threshold: float, axis=-1) -> np.ndarray:
    """Block soft-threshold of the groups formed along `axis`"""
    norms = np.sqrt(np.sum(v * v, axis=axis, keepdims=True))
    return v * group_shrink_factor(norms, threshold)


def z_threshold(step: float, lambda_z: float, n_inputs: int) -> float:
    """Threshold on the unscaled trajectory norm for the RMS-scaled latent penalty"""
    return step * lambda_z / np.sqrt(max(n_inputs, 1))


# ============================================
# Linear model
# ============================================

def prox_weights(
    w0: np.ndarray,
    wk: np.ndarray,
    step: float,
    lambda_w: float,
    alpha: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Prox of the W penalties

    Args:
        w0: d x (d+p) invariant weights
        wk: N x d x d environment weights
        step: Step size
        lambda_w: Overall sparsity scale
        alpha: Within/between group balance

    Returns:
        (w0, wk) after the inner and outer thresholds
    """
    d = w0.shape[0]
    inner = step * lambda_w * alpha
    outer = step * lambda_w * (1.0 - alpha)

    wk_new = soft_threshold(wk, inner)
    obs = w0[:, :d]
    norms = np.sqrt(obs ** 2 + np.sum(wk_new ** 2, axis=0))
    factor = group_shrink_factor(norms, outer)

    w0_new = np.empty_like(w0)
    w0_new[:, :d] = obs * factor
    w0_new[:, d:] = soft_threshold(w0[:, d:], outer)
    return w0_new, wk_new * factor[None, :, :]


def prox_latents(z: np.ndarray, step: float, lambda_z: float) -> np.ndarray:
    """Block soft-threshold every trajectory z[k, l, :]"""
    return group_soft_threshold(z, z_threshold(step, lambda_z, z.shape[2]), axis=2)


def prox_hierarchical(model: LinearModel, step: float, hp: HyperParams) -> LinearModel:
    """Exact prox of the full linear penalty with parameter `step`"""
    w0, wk = prox_weights(model.w0, model.wk, step, hp.lambda_w, hp.alpha)
    z = prox_latents(model.z, step, hp.lambda_z)
    return LinearModel(w0=w0, wk=wk, z=z)


def linear_penalty(model: LinearModel, hp: HyperParams) -> float:
    """lambda_w * ((1-alpha) outer groups + alpha inner groups) + RMS latent penalty"""
    return weight_penalty(model.w0, model.wk, hp.lambda_w, hp.alpha) + latent_penalty(model.z, hp.lambda_z)


def weight_penalty(w0: np.ndarray, wk: np.ndarray, lambda_w: float, alpha: float) -> float:
    d = w0.shape[0]
    outer = np.sum(np.sqrt(w0[:, :d] ** 2 + np.sum(wk ** 2, axis=0))) + np.sum(np.abs(w0[:, d:]))
    inner = np.sum(np.abs(wk))
    return float(lambda_w * ((1.0 - alpha) * outer + alpha * inner))


def latent_penalty(z: np.ndarray, lambda_z: float) -> float:
    if z.size == 0:
        return 0.0
    return float(lambda_z * np.sum(np.sqrt(np.mean(z ** 2, axis=2))))


# ============================================
# Nonlinear model
# ============================================

def nonlinear_group_norms(f_first: np.ndarray, g_first: np.ndarray) -> np.ndarray:
    """
    Norms of the outer groups, shape d x (d+p)

    Group (i, j <= d) concatenates f_first[i, :, j] with g_first[k, i, :, j] for
    every k; for latent inputs j > d it is f_first[i, :, j] alone.
    """
    d = f_first.shape[0]
    sq = np.sum(f_first ** 2, axis=1)
    sq[:, :d] += np.sum(g_first ** 2, axis=(0, 2))
    return np.sqrt(sq)


def prox_first_layers(
    f_first: np.ndarray,
    g_first: np.ndarray,
    step: float,
    lambda_w: float,
    alpha: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Inner threshold on every g_first column, then the outer group threshold"""
    d = f_first.shape[0]
    g_new = group_soft_threshold(g_first, step * lambda_w * alpha, axis=2)
    factor = group_shrink_factor(nonlinear_group_norms(f_first, g_new), step * lambda_w * (1.0 - alpha))
    f_new = f_first * factor[:, None, :]
    g_new = g_new * factor[None, :, None, :d]
    return f_new, g_new


def prox_nonlinear(model: NonlinearModel, step: float, hp: HyperParams) -> NonlinearModel:
    """Prox of the first-layer group penalties and the latent penalty"""
    f_first, g_first = prox_first_layers(model.f_first, model.g_first, step, hp.lambda_w, hp.alpha)
    z = prox_latents(model.z, step, hp.lambda_z)
    return model.with_tensors(f_first=f_first, g_first=g_first, z=z)


def nonlinear_penalty(model: NonlinearModel, hp: HyperParams) -> float:
    outer = np.sum(nonlinear_group_norms(model.f_first, model.g_first))
    inner = np.sum(np.sqrt(np.sum(model.g_first ** 2, axis=2)))
    groups = hp.lambda_w * ((1.0 - hp.alpha) * outer + hp.alpha * inner)
    return float(groups + latent_penalty(model.z, hp.lambda_z))
