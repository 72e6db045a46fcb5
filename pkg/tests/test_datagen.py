"""
Tests for the synthetic benchmark generator
"""

import numpy as np
import pytest
from pydantic import ValidationError

from invargc.models.domain import GraphSkeleton
from invargc.models.schemas import GenConfig
from invargc.services.datagen_service import (
    apply_interventions,
    generate_benchmark,
    run_recurrence,
    sample_graph,
    simulate,
    spectral_radius,
    transition_matrix,
)
from invargc.utils.constants import InterventionKind, Mechanism
from invargc.utils.error_handler import GenerationError
from invargc.utils.helpers import make_rng


def skeleton_for(cfg: GenConfig):
    rng = make_rng(cfg.seed)
    return apply_interventions(sample_graph(cfg, rng), cfg, rng)


class TestSampleGraph:
    def test_empty_graph(self):
        cfg = GenConfig(d=5, p=1, e=0.0, n_intervened=0)
        graph = sample_graph(cfg, make_rng(0))
        assert graph.adjacency.sum() == 0
        assert np.all(graph.base_weights == 0.0)
        # latent wiring is independent of e
        assert np.count_nonzero(graph.latent_to_obs) == 2

    def test_complete_graph_includes_self_loops(self):
        graph = sample_graph(GenConfig(d=4, e=1.0), make_rng(0))
        assert graph.adjacency.sum() == 16
        assert np.all(np.diag(graph.adjacency) == 1)

    def test_edge_frequency(self):
        rng = make_rng(11)
        cfg = GenConfig(d=5, p=0, e=0.3)
        draws = np.stack([sample_graph(cfg, rng).adjacency for _ in range(400)])
        standard_error = np.sqrt(0.3 * 0.7 / draws.size)
        assert abs(draws.mean() - 0.3) < 3 * standard_error

    def test_latent_children(self):
        graph = sample_graph(GenConfig(d=6, p=3, e=0.3), make_rng(5))
        assert len(graph.latent_children) == 3
        for l, children in enumerate(graph.latent_children):
            assert len(children) == 2 and children[0] != children[1]
            assert set(np.flatnonzero(graph.latent_to_obs[l])) == set(children)
        dynamics = np.diag(graph.latent_dynamics)
        assert np.all(dynamics > 0)
        assert np.array_equal(graph.latent_dynamics, np.diag(dynamics))

    def test_spectral_radius_bound(self):
        for seed in range(10):
            graph = sample_graph(GenConfig(d=6, p=2, e=1.0), make_rng(seed))
            assert spectral_radius(transition_matrix(graph, 0)) <= 0.9 + 1e-9

    def test_latent_needs_two_children(self):
        with pytest.raises(GenerationError) as exc:
            sample_graph(GenConfig(d=1, p=1), make_rng(0))
        assert exc.value.exit_code == 2

    def test_single_variable_without_latents(self):
        graph = sample_graph(GenConfig(d=1, p=0, e=1.0), make_rng(0))
        assert graph.adjacency.shape == (1, 1)


class TestInterventions:
    def test_no_intervened_environment(self):
        skeleton = skeleton_for(GenConfig(d=5, e=0.5, n_intervened=0, seed=3))
        assert skeleton.intervention_mask.sum() == 0
        for k in range(3):
            np.testing.assert_array_equal(skeleton.obs_weights[k], skeleton.base_weights)

    @pytest.mark.parametrize("kind", list(InterventionKind))
    def test_mask_matches_deviation(self, kind):
        for seed in range(5):
            skeleton = skeleton_for(GenConfig(d=5, e=0.5, n_intervened=2, intervention_kind=kind, seed=seed))
            np.testing.assert_array_equal(skeleton.deviation_mask(), skeleton.intervention_mask)
            assert np.all(skeleton.intervention_mask <= skeleton.adjacency[None, :, :])
            assert skeleton.intervention_mask[2].sum() == 0

    @pytest.mark.parametrize("kind", list(InterventionKind))
    def test_interventions_keep_stationarity(self, kind):
        for seed in range(5):
            cfg = GenConfig(d=5, e=0.5, n_intervened=3, intervention_kind=kind, seed=seed)
            skeleton = skeleton_for(cfg)
            for k in range(cfg.n_envs):
                assert spectral_radius(transition_matrix(skeleton, k)) <= 0.9 + 1e-9

    def test_imperfect_edge_changes_exact_count(self):
        skeleton = skeleton_for(GenConfig(d=5, e=0.5, n_intervened=1, n_intervened_edges=2, seed=4))
        assert skeleton.intervention_mask[0].sum() == 2
        changed = skeleton.intervention_mask[0] == 1
        shift = np.abs(skeleton.obs_weights[0] - skeleton.base_weights)[changed]
        assert np.all(shift >= 0.25)

    def test_perfect_node_masks_whole_parent_set(self):
        skeleton = skeleton_for(GenConfig(
            d=5, e=0.5, n_intervened=1, intervention_kind="perfect-node", seed=2
        ))
        mask = skeleton.intervention_mask[0]
        targets = np.flatnonzero(mask.any(axis=0))
        assert len(targets) == 1
        target = targets[0]
        np.testing.assert_array_equal(mask[:, target], skeleton.adjacency[:, target])
        assert np.all(skeleton.obs_weights[0][:, target] == 0.0)

    def test_latent_weights_untouched(self):
        cfg = GenConfig(d=5, e=0.5, n_intervened=3, seed=8)
        rng = make_rng(cfg.seed)
        base = sample_graph(cfg, rng)
        skeleton = apply_interventions(base, cfg, rng)
        np.testing.assert_array_equal(skeleton.latent_to_obs, base.latent_to_obs)

    def test_too_few_edges(self):
        with pytest.raises(GenerationError):
            skeleton_for(GenConfig(d=3, e=0.0, n_intervened=1, intervention_kind="imperfect-edge"))

    def test_node_level_without_parents(self):
        with pytest.raises(GenerationError):
            skeleton_for(GenConfig(d=3, e=0.0, n_intervened=1, intervention_kind="imperfect-node"))


class TestRecurrence:
    def test_scalar_linear_oracle(self):
        noise = np.array([[1.0], [0.5], [-0.25], [2.0], [0.0]])
        x, z = run_recurrence(
            np.array([[0.5]]), np.zeros((0, 1)), np.zeros((0, 0)),
            noise, np.zeros((5, 0)), Mechanism.LINEAR,
        )
        expected = [noise[0, 0]]
        for t in range(1, 5):
            expected.append(0.5 * expected[-1] + noise[t, 0])
        np.testing.assert_allclose(x[:, 0], expected)
        assert z.shape == (5, 0)

    def test_latent_feeds_children(self):
        noise_z = np.array([[2.0], [0.0], [0.0]])
        x, z = run_recurrence(
            np.zeros((2, 2)), np.array([[1.0, -0.5]]), np.array([[0.5]]),
            np.zeros((3, 2)), noise_z, Mechanism.LINEAR,
        )
        np.testing.assert_allclose(z[:, 0], [2.0, 1.0, 0.5])
        np.testing.assert_allclose(x[1], [2.0, -1.0])
        np.testing.assert_allclose(x[2], [1.0, -0.5])

    def test_leaky_relu_negative_branch(self):
        noise = np.array([[2.0], [0.3]])
        x, _ = run_recurrence(
            np.array([[-1.0]]), np.zeros((0, 1)), np.zeros((0, 0)),
            noise, np.zeros((2, 0)), Mechanism.LEAKY_RELU, leaky_slope=0.01,
        )
        assert x[1, 0] == pytest.approx(0.01 * -2.0 + 0.3)

    def test_leaky_relu_positive_branch(self):
        noise = np.array([[2.0], [0.3]])
        x, _ = run_recurrence(
            np.array([[0.5]]), np.zeros((0, 1)), np.zeros((0, 0)),
            noise, np.zeros((2, 0)), Mechanism.LEAKY_RELU,
        )
        assert x[1, 0] == pytest.approx(1.0 + 0.3)


class TestSimulate:
    def test_requires_environment_weights(self, small_config):
        base = sample_graph(small_config, make_rng(small_config.seed))
        with pytest.raises(GenerationError):
            simulate(base, small_config, make_rng(0))

    def test_shapes_and_truth(self, small_config):
        skeleton = skeleton_for(small_config)
        ds, truth = simulate(skeleton, small_config, make_rng(5))
        assert ds.series.shape == (small_config.n_envs, small_config.d, small_config.T)
        assert truth.latent_series.shape == (small_config.n_envs, small_config.p, small_config.T)
        np.testing.assert_array_equal(truth.obs_weights, skeleton.obs_weights)

    def test_latents_ignore_observed_history(self, small_config):
        skeleton = skeleton_for(small_config)
        rewired = GraphSkeleton(**{
            **skeleton.model_dump(),
            "obs_weights": np.zeros_like(skeleton.obs_weights),
            "intervention_mask": np.zeros_like(skeleton.intervention_mask),
        })
        _, truth = simulate(skeleton, small_config, make_rng(8))
        _, rewired_truth = simulate(rewired, small_config, make_rng(8))
        np.testing.assert_array_equal(truth.latent_series, rewired_truth.latent_series)

    def test_latent_regression_has_no_observed_coefficients(self):
        cfg = GenConfig(d=4, p=1, e=0.5, n_envs=1, n_intervened=0, T=4000, burn_in=100,
                        mechanism=Mechanism.LINEAR, seed=17)
        skeleton = skeleton_for(cfg)
        ds, truth = simulate(skeleton, cfg, make_rng(2))
        x, z = ds.series[0], truth.latent_series[0]
        design = np.vstack([x[:, :-1], z[:, :-1]]).T
        coef, *_ = np.linalg.lstsq(design, z[0, 1:], rcond=None)
        # unit noise over 4000 steps puts each standard error near 0.02
        np.testing.assert_allclose(coef[:4], 0.0, atol=0.1)
        assert coef[4] == pytest.approx(skeleton.latent_dynamics[0, 0], abs=0.1)

    def test_burn_in_is_dropped_from_the_front(self):
        cfg = GenConfig(d=3, p=0, e=0.5, n_envs=2, n_intervened=0, T=80, burn_in=0,
                        mechanism=Mechanism.LINEAR, seed=11)
        skeleton = skeleton_for(cfg)
        ds_plain, _ = simulate(skeleton, cfg, make_rng(3))
        ds_burned, _ = simulate(skeleton, cfg.model_copy(update={"burn_in": 30}), make_rng(3))
        # same noise rows, shifted by the burn-in
        np.testing.assert_array_equal(ds_plain.series[:, :, 30:], ds_burned.series[:, :, :50])


class TestGenerateBenchmark:
    def test_default_shapes(self):
        ds, truth = generate_benchmark(GenConfig(seed=1))
        assert ds.series.shape == (3, 5, 1000)
        assert truth.latent_series.shape == (3, 1, 1000)
        assert len(truth.latent_children) == 1 and len(truth.latent_children[0]) == 2
        assert truth.intervention_mask.any(axis=(1, 2)).tolist() == [True, False, False]

    def test_deterministic(self, small_config):
        ds_a, truth_a = generate_benchmark(small_config)
        ds_b, truth_b = generate_benchmark(small_config)
        np.testing.assert_array_equal(ds_a.series, ds_b.series)
        np.testing.assert_array_equal(truth_a.latent_series, truth_b.latent_series)
        np.testing.assert_array_equal(truth_a.obs_weights, truth_b.obs_weights)

    def test_seed_changes_output(self, small_config):
        ds_a, _ = generate_benchmark(small_config)
        ds_b, _ = generate_benchmark(small_config.model_copy(update={"seed": small_config.seed + 1}))
        assert not np.array_equal(ds_a.series, ds_b.series)

    def test_without_latents(self, small_config):
        ds, truth = generate_benchmark(small_config.model_copy(update={"p": 0}))
        assert truth.latent_series.shape == (small_config.n_envs, 0, small_config.T)
        assert truth.latent_children == []
        assert ds.series.shape == (small_config.n_envs, small_config.d, small_config.T)

    def test_zero_weights_tiny_noise(self):
        cfg = GenConfig(d=3, p=0, e=0.0, n_intervened=0, noise_sd=1e-12, T=50, burn_in=10)
        ds, _ = generate_benchmark(cfg)
        assert np.max(np.abs(ds.series)) < 1e-10

    def test_nonlinear_mechanism_is_finite(self):
        ds, _ = generate_benchmark(GenConfig(d=5, e=0.5, T=300, mechanism="leaky-relu", seed=9))
        assert np.all(np.isfinite(ds.series))

    def test_latent_has_no_observed_parents(self, small_config):
        _, truth = generate_benchmark(small_config)
        matrix = transition_matrix(truth, 0)
        d = small_config.d
        assert np.all(matrix[:d, d:] == 0.0)


class TestGenConfig:
    @pytest.mark.parametrize("field,value", [("e", 1.5), ("e", -0.1), ("d", 0), ("noise_sd", 0.0), ("T", 1)])
    def test_out_of_range(self, field, value):
        with pytest.raises(ValidationError):
            GenConfig(**{field: value})

    def test_too_many_intervened(self):
        with pytest.raises(ValidationError):
            GenConfig(n_envs=2, n_intervened=3)
