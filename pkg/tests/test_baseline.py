"""
Tests for the pooled VAR(1) lasso baseline
"""

import numpy as np
import pytest
from sklearn.linear_model import Lasso

from invargc.models.domain import BaselineModel, MultiEnvDataset
from invargc.services.baseline_service import (
    baseline_edge_scores,
    default_lambda,
    fit_var_lasso,
    lasso_objective,
    pooled_design,
)


@pytest.fixture
def var_dataset(rng):
    """Two environments of a stable 3-variable VAR(1)"""
    coef = np.array([[0.5, 0.0, 0.0], [0.4, 0.3, 0.0], [0.0, -0.5, 0.35]])
    series = np.zeros((2, 3, 150))
    for k in range(2):
        series[k, :, 0] = rng.normal(size=3)
        for t in range(149):
            series[k, :, t + 1] = coef @ series[k, :, t] + rng.normal(size=3)
    return MultiEnvDataset.from_array(series)


def test_pooled_design_stacks_environments(tiny_dataset):
    x, y = pooled_design(tiny_dataset)
    assert x.shape == (12, 3) and y.shape == (12, 3)
    np.testing.assert_array_equal(x[6], tiny_dataset.series[1, :, 0])
    np.testing.assert_array_equal(y[6], tiny_dataset.series[1, :, 1])


def test_default_lambda(tiny_dataset):
    assert default_lambda(tiny_dataset) == pytest.approx(0.05 * 2 * 6)


def test_huge_penalty_gives_zero(var_dataset):
    model = fit_var_lasso(var_dataset, lam=1e9)
    assert np.all(model.coef == 0.0)
    assert model.n_sweeps == 1


def test_single_variable_ols(rng):
    ds = MultiEnvDataset.from_array(rng.normal(size=(2, 1, 30)))
    x, y = pooled_design(ds)
    model = fit_var_lasso(ds, lam=0.0)
    assert model.coef[0, 0] == pytest.approx(float(x[:, 0] @ y[:, 0] / (x[:, 0] @ x[:, 0])), rel=1e-12)


def test_matches_sklearn_lasso(var_dataset):
    lam = 20.0
    model = fit_var_lasso(var_dataset, lam=lam)
    x, y = pooled_design(var_dataset)
    n = x.shape[0]
    for i in range(3):
        reference = Lasso(alpha=lam / (2 * n), fit_intercept=False, tol=1e-12, max_iter=100000)
        reference.fit(x, y[:, i])
        np.testing.assert_allclose(model.coef[i], reference.coef_, atol=1e-6)


def test_objective_decreases_with_sweeps(var_dataset):
    x, y = pooled_design(var_dataset)
    values = [
        lasso_objective(fit_var_lasso(var_dataset, lam=10.0, max_sweeps=s).coef, x, y, 10.0)
        for s in range(1, 8)
    ]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_sparsity_grows_with_penalty(var_dataset):
    nonzero = [int(np.count_nonzero(fit_var_lasso(var_dataset, lam=lam).coef)) for lam in (0.0, 50.0, 200.0, 1e4)]
    assert nonzero == sorted(nonzero, reverse=True)
    assert nonzero[0] == 9 and nonzero[-1] == 0


def test_recovers_support(var_dataset):
    scores = baseline_edge_scores(fit_var_lasso(var_dataset)).scores
    truth = np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1]])
    assert scores[truth == 1].min() > scores[truth == 0].max()


def test_edge_scores_are_transposed_magnitudes():
    model = BaselineModel(coef=np.array([[0.0, -0.4], [0.2, 0.0]]), lam=1.0)
    np.testing.assert_allclose(baseline_edge_scores(model).scores, [[0.0, 0.2], [0.4, 0.0]])
