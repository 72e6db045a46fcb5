"""
Synthetic multi-environment benchmark generator

A first-order VAR over d observed and p latent variables. Each latent has no
observed parents, a diagonal self-dynamic and exactly two observed children;
intervened environments perturb observed-to-observed coefficients only.
"""

from typing import List, Tuple

import numpy as np

from invargc.models.domain import GraphSkeleton, GroundTruth, MultiEnvDataset
from invargc.models.schemas import GenConfig
from invargc.utils.constants import (
    ERROR_MESSAGES,
    INTERVENTION_ATTEMPTS,
    LATENT_CHILDREN,
    LATENT_DYNAMICS_RANGE,
    MIN_INTERVENTION_SHIFT,
    SPECTRAL_RADIUS_TARGET,
    InterventionKind,
    Mechanism,
)
from invargc.utils.error_handler import GenerationError
from invargc.utils.helpers import leaky_relu, make_rng, spawn_rngs
from invargc.utils.logger import logger


def _signed_uniform(rng: np.random.Generator, low: float, high: float, size) -> np.ndarray:
    """Magnitudes uniform in [low, high] with random sign"""
    magnitude = rng.uniform(low, high, size=size)
    sign = rng.choice(np.array([-1.0, 1.0]), size=size)
    return magnitude * sign


def full_transition(obs_weights: np.ndarray, latent_to_obs: np.ndarray, latent_dynamics: np.ndarray) -> np.ndarray:
    """(d+p) x (d+p) source-row transition matrix [[W_XX, 0], [W_XZ, W_ZZ]]"""
    d = obs_weights.shape[0]
    p = latent_dynamics.shape[0]
    matrix = np.zeros((d + p, d + p))
    matrix[:d, :d] = obs_weights
    matrix[d:, :d] = latent_to_obs
    matrix[d:, d:] = latent_dynamics
    return matrix


def spectral_radius(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def transition_matrix(truth: GraphSkeleton, k: int) -> np.ndarray:
    """Full transition matrix of environment k (invariant weights if no per-env weights yet)"""
    weights = truth.base_weights if truth.obs_weights is None else truth.obs_weights[k]
    return full_transition(weights, truth.latent_to_obs, truth.latent_dynamics)


def sample_graph(cfg: GenConfig, rng: np.random.Generator) -> GraphSkeleton:
    """
    Sample the invariant graph, its coefficients and the latent wiring

    Args:
        cfg: Generator configuration
        rng: Random stream

    Returns:
        Skeleton without per-environment weights, rescaled to spectral radius <= 0.9
    """
    d, p = cfg.d, cfg.p
    if p >= 1 and d < LATENT_CHILDREN:
        raise GenerationError(ERROR_MESSAGES["TOO_FEW_CHILDREN"], details={"d": d, "p": p})

    adjacency = (rng.random((d, d)) < cfg.e).astype(np.int8)
    weights = np.where(adjacency == 1, _signed_uniform(rng, cfg.coef_low, cfg.coef_high, (d, d)), 0.0)

    latent_children: List[List[int]] = []
    latent_to_obs = np.zeros((p, d))
    for l in range(p):
        children = sorted(int(c) for c in rng.choice(d, size=LATENT_CHILDREN, replace=False))
        latent_children.append(children)
        latent_to_obs[l, children] = _signed_uniform(rng, cfg.coef_low, cfg.coef_high, LATENT_CHILDREN)
    latent_dynamics = np.diag(rng.uniform(*LATENT_DYNAMICS_RANGE, size=p))

    matrix = full_transition(weights, latent_to_obs, latent_dynamics)
    radius = spectral_radius(matrix)
    if radius > SPECTRAL_RADIUS_TARGET:
        matrix = matrix * (SPECTRAL_RADIUS_TARGET / radius)

    return GraphSkeleton(
        adjacency=adjacency,
        base_weights=matrix[:d, :d],
        latent_children=latent_children,
        latent_dynamics=matrix[d:, d:],
        latent_to_obs=matrix[d:, :d],
    )


def _intervene_once(
    base: GraphSkeleton,
    cfg: GenConfig,
    rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """One candidate intervention: (weights, mask) for a single environment"""
    kind = InterventionKind(cfg.intervention_kind)
    adjacency = base.adjacency
    d = base.n_vars

    if kind.is_node_level:
        targets = [i for i in range(d) if adjacency[:, i].any()]
        if not targets:
            raise GenerationError(ERROR_MESSAGES["NO_NODE_TARGET"])
        target = int(rng.choice(targets))
        chosen = [(int(j), target) for j in np.flatnonzero(adjacency[:, target])]
    else:
        edges = np.argwhere(adjacency == 1)
        if cfg.n_intervened_edges > len(edges):
            raise GenerationError(
                ERROR_MESSAGES["TOO_FEW_EDGES"],
                details={"n_intervened_edges": cfg.n_intervened_edges, "available": int(len(edges))},
            )
        picks = rng.choice(len(edges), size=cfg.n_intervened_edges, replace=False)
        chosen = [(int(edges[m][0]), int(edges[m][1])) for m in sorted(picks)]

    weights = np.array(base.base_weights, copy=True)
    mask = np.zeros((d, d), dtype=np.int8)
    for j, i in chosen:
        if kind.is_perfect:
            weights[j, i] = 0.0
        else:
            old = weights[j, i]
            for _ in range(INTERVENTION_ATTEMPTS):
                fresh = float(_signed_uniform(rng, cfg.coef_low, cfg.coef_high, None))
                if abs(fresh - old) >= MIN_INTERVENTION_SHIFT:
                    break
            else:
                raise GenerationError(
                    "coefficient range too narrow for an intervention shift",
                    details={"min_shift": MIN_INTERVENTION_SHIFT, "edge": [j, i]},
                )
            weights[j, i] = fresh
        mask[j, i] = 1
    return weights, mask


def apply_interventions(base: GraphSkeleton, cfg: GenConfig, rng: np.random.Generator) -> GraphSkeleton:
    """
    Derive per-environment weights and intervention masks

    The first n_intervened environments are intervened; the rest copy the
    invariant weights exactly. Latent-to-observed weights are never touched.
    """
    n_envs = cfg.n_envs
    d = base.n_vars
    obs_weights = np.repeat(np.asarray(base.base_weights)[None, :, :], n_envs, axis=0)
    mask = np.zeros((n_envs, d, d), dtype=np.int8)

    for k in range(cfg.n_intervened):
        for _ in range(INTERVENTION_ATTEMPTS):
            weights, env_mask = _intervene_once(base, cfg, rng)
            matrix = full_transition(weights, base.latent_to_obs, base.latent_dynamics)
            if spectral_radius(matrix) <= SPECTRAL_RADIUS_TARGET + 1e-12:
                break
        else:
            raise GenerationError(
                "could not draw a stationary intervention",
                details={"env": k, "attempts": INTERVENTION_ATTEMPTS},
            )
        obs_weights[k] = weights
        mask[k] = env_mask

    return GraphSkeleton(**{**base.model_dump(), "obs_weights": obs_weights, "intervention_mask": mask})


def run_recurrence(
    obs_weights: np.ndarray,
    latent_to_obs: np.ndarray,
    latent_dynamics: np.ndarray,
    noise_x: np.ndarray,
    noise_z: np.ndarray,
    mechanism: Mechanism,
    leaky_slope: float = 0.01
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Iterate the VAR for given noise draws

    Args:
        obs_weights: d x d source-row weights
        latent_to_obs: p x d
        latent_dynamics: p x p diagonal
        noise_x: total x d noise; row 0 is the initial state
        noise_z: total x p noise; row 0 is the initial state
        mechanism: linear or leaky-relu link
        leaky_slope: negative slope of the leaky-relu link

    Returns:
        (x, z) of shapes total x d and total x p
    """
    total = noise_x.shape[0]
    if Mechanism(mechanism) == Mechanism.LINEAR:
        link = lambda a: a  # noqa: E731
    else:
        link = lambda a: leaky_relu(a, leaky_slope)  # noqa: E731

    x = np.empty_like(noise_x)
    z = np.empty_like(noise_z)
    x[0] = noise_x[0]
    z[0] = noise_z[0]
    for t in range(total - 1):
        x[t + 1] = link(obs_weights.T @ x[t] + latent_to_obs.T @ z[t]) + noise_x[t + 1]
        z[t + 1] = link(latent_dynamics.T @ z[t]) + noise_z[t + 1]
    return x, z


def simulate(
    truth: GraphSkeleton,
    cfg: GenConfig,
    rng: np.random.Generator
) -> Tuple[MultiEnvDataset, GroundTruth]:
    """
    Simulate every environment on its own pre-split stream and drop the burn-in

    Returns:
        Dataset of shape N x d x T and ground truth carrying the latent trajectories
    """
    if truth.obs_weights is None or truth.intervention_mask is None:
        raise GenerationError("skeleton has no per-environment weights; run apply_interventions first")

    n_envs, d, p = truth.obs_weights.shape[0], truth.n_vars, truth.n_latents
    total = cfg.burn_in + cfg.T
    series = np.empty((n_envs, d, cfg.T))
    latent_series = np.empty((n_envs, p, cfg.T))

    for k, env_rng in enumerate(spawn_rngs(rng, n_envs)):
        noise_x = env_rng.normal(0.0, cfg.noise_sd, size=(total, d))
        noise_z = env_rng.normal(0.0, cfg.noise_sd, size=(total, p))
        x, z = run_recurrence(
            truth.obs_weights[k], truth.latent_to_obs, truth.latent_dynamics,
            noise_x, noise_z, cfg.mechanism, cfg.leaky_slope,
        )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise GenerationError(ERROR_MESSAGES["NON_FINITE_SERIES"], details={"env": k})
        series[k] = x[cfg.burn_in:].T
        latent_series[k] = z[cfg.burn_in:].T

    ds = MultiEnvDataset.from_array(series)
    full = GroundTruth(**truth.model_dump(), latent_series=latent_series)
    return ds, full


def generate_benchmark(cfg: GenConfig) -> Tuple[MultiEnvDataset, GroundTruth]:
    """sample_graph -> apply_interventions -> simulate on streams split from cfg.seed"""
    graph_rng, intervention_rng, sim_rng = spawn_rngs(make_rng(cfg.seed), 3)
    skeleton = sample_graph(cfg, graph_rng)
    skeleton = apply_interventions(skeleton, cfg, intervention_rng)
    ds, truth = simulate(skeleton, cfg, sim_rng)

    logger.info(
        f"Generated benchmark N={ds.n_envs} d={ds.n_vars} T={ds.n_steps} "
        f"edges={int(truth.adjacency.sum())} "
        f"intervened_envs={int(truth.intervention_mask.any(axis=(1, 2)).sum())}",
        extra={"seed": cfg.seed},
    )
    return ds, truth
