"""
Tests for the hierarchical proximal operators
"""

import numpy as np
import pytest

from invargc.models.domain import LinearModel
from invargc.models.schemas import HyperParams
from invargc.services.prox import (
    group_soft_threshold,
    linear_penalty,
    nonlinear_group_norms,
    prox_hierarchical,
    prox_latents,
    prox_nonlinear,
    prox_weights,
    soft_threshold,
)
from invargc.utils.validation import linear_penalty_groups, prox_by_dual_descent
from tests.conftest import random_linear, random_nonlinear


def hyper(lambda_w=1.0, alpha=0.5, lambda_z=1.0, n_latents=1):
    return HyperParams(lambda_w=lambda_w, alpha=alpha, lambda_z=lambda_z, n_latents=n_latents)


def flatten(model: LinearModel) -> np.ndarray:
    return np.concatenate([model.w0.ravel(), model.wk.ravel(), model.z.ravel()])


class TestThresholds:
    def test_soft_threshold(self):
        np.testing.assert_allclose(soft_threshold(np.array([2.0, -0.3, -2.0, 0.0]), 0.5), [1.5, 0.0, -1.5, 0.0])

    def test_group_soft_threshold(self):
        out = group_soft_threshold(np.array([[3.0, 4.0], [0.3, 0.4]]), 2.5, axis=1)
        np.testing.assert_allclose(out, [[1.5, 2.0], [0.0, 0.0]])

    def test_zero_group_stays_zero(self):
        assert np.all(group_soft_threshold(np.zeros((2, 3)), 0.0, axis=1) == 0.0)


class TestLinearProx:
    def test_outer_group_only(self):
        w0, wk = prox_weights(np.array([[3.0]]), np.array([[[4.0]]]), 1.0, 2.5, 0.0)
        assert w0[0, 0] == pytest.approx(1.5)
        assert wk[0, 0, 0] == pytest.approx(2.0)

    def test_inner_only(self):
        w0, wk = prox_weights(np.zeros((1, 1)), np.array([[[2.0]], [[-0.3]]]), 1.0, 0.5, 1.0)
        np.testing.assert_allclose(wk[:, 0, 0], [1.5, 0.0])
        assert w0[0, 0] == 0.0

    def test_zero_threshold_is_identity(self, rng):
        model = random_linear(rng)
        out = prox_hierarchical(model, 0.7, hyper(lambda_w=0.0, lambda_z=0.0))
        np.testing.assert_array_equal(flatten(out), flatten(model))

    def test_latent_weights_soft_thresholded(self):
        w0 = np.array([[0.0, 1.0, -0.2]])
        out, _ = prox_weights(w0, np.zeros((1, 1, 1)), 1.0, 1.0, 0.5)
        np.testing.assert_allclose(out[0, 1:], [0.5, 0.0])

    def test_latent_trajectory_norm(self, rng):
        z = rng.normal(size=(2, 1, 16))
        step, lambda_z = 0.5, 3.0
        out = prox_latents(z, step, lambda_z)
        before = np.linalg.norm(z, axis=2)
        after = np.linalg.norm(out, axis=2)
        np.testing.assert_allclose(after, np.maximum(before - step * lambda_z / 4.0, 0.0))

    def test_matches_dual_descent(self, rng):
        for _ in range(20):
            model = random_linear(rng, n_envs=2, d=3, p=1, n=5)
            hp = hyper(lambda_w=float(rng.uniform(0.0, 3.0)), alpha=float(rng.uniform(0.05, 0.95)),
                       lambda_z=float(rng.uniform(0.0, 5.0)))
            step = float(rng.uniform(0.1, 1.0))
            expected = prox_by_dual_descent(flatten(model), linear_penalty_groups(model, step, hp))
            np.testing.assert_allclose(flatten(prox_hierarchical(model, step, hp)), expected, atol=1e-6)

    def test_prox_is_minimizer(self, rng):
        model = random_linear(rng)
        hp = hyper(lambda_w=1.5, alpha=0.3, lambda_z=2.0)
        step = 0.4
        out = prox_hierarchical(model, step, hp)

        def value(m: LinearModel) -> float:
            return float(np.sum((flatten(m) - flatten(model)) ** 2) / (2 * step) + linear_penalty(m, hp))

        best = value(out)
        for _ in range(50):
            nudged = out.with_tensors(**{k: v + 1e-3 * rng.normal(size=v.shape) for k, v in out.tensors().items()})
            assert value(nudged) >= best - 1e-12

    def test_zero_groups_grow_with_lambda(self, rng):
        model = random_linear(rng, n_envs=3, d=4, p=0, n=5)
        counts = []
        for lambda_w in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]:
            w0, _ = prox_weights(model.w0, model.wk, 1.0, lambda_w, 0.5)
            counts.append(int(np.sum(w0 == 0.0)))
        assert counts == sorted(counts)
        assert counts[-1] == 16


class TestNonlinearProx:
    def test_huge_penalty_zeroes_first_layers(self, rng):
        model = random_nonlinear(rng)
        out = prox_nonlinear(model, 1.0, hyper(lambda_w=1e9, lambda_z=0.0))
        assert np.all(out.f_first == 0.0)
        assert np.all(out.g_first == 0.0)
        np.testing.assert_array_equal(out.f_hidden, model.f_hidden)
        np.testing.assert_array_equal(out.z, model.z)

    def test_zero_penalty_is_identity(self, rng):
        model = random_nonlinear(rng)
        out = prox_nonlinear(model, 1.0, hyper(lambda_w=0.0, lambda_z=0.0))
        np.testing.assert_array_equal(out.f_first, model.f_first)
        np.testing.assert_array_equal(out.g_first, model.g_first)

    def test_group_norm_layout(self, rng):
        model = random_nonlinear(rng, n_envs=2, d=2, p=1)
        norms = nonlinear_group_norms(model.f_first, model.g_first)
        assert norms.shape == (2, 3)
        expected = np.sqrt(np.sum(model.f_first[1, :, 0] ** 2) + np.sum(model.g_first[:, 1, :, 0] ** 2))
        assert norms[1, 0] == pytest.approx(expected)
        assert norms[0, 2] == pytest.approx(np.linalg.norm(model.f_first[0, :, 2]))

    def test_outer_shrinkage_of_group(self, rng):
        model = random_nonlinear(rng)
        before = nonlinear_group_norms(model.f_first, model.g_first)
        out = prox_nonlinear(model, 1.0, hyper(lambda_w=0.4, alpha=1e-9, lambda_z=0.0))
        after = nonlinear_group_norms(out.f_first, out.g_first)
        np.testing.assert_allclose(after, np.maximum(before - 0.4 * (1 - 1e-9), 0.0), atol=1e-8)
