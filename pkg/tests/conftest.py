"""
Shared fixtures: seeded generators, tiny datasets and generator configs
"""

import json

import numpy as np
import pytest

from invargc.models.domain import LinearModel, MultiEnvDataset, NonlinearModel
from invargc.models.schemas import GenConfig
from invargc.utils.helpers import make_rng


def nonlinear_shapes(n_envs: int, d: int, p: int, h: int, hc: int, he: int, n: int):
    return {
        "f_first": (d, h, d + p), "f_first_bias": (d, h), "f_hidden": (d, h, h), "f_hidden_bias": (d, h),
        "f_out": (d, hc, h), "f_out_bias": (d, hc),
        "g_first": (n_envs, d, h, d), "g_first_bias": (n_envs, d, h),
        "g_hidden": (n_envs, d, h, h), "g_hidden_bias": (n_envs, d, h),
        "g_out": (n_envs, d, hc, h), "g_out_bias": (n_envs, d, hc),
        "agg_hidden": (d, he, 2 * hc), "agg_hidden_bias": (d, he), "agg_out": (d, he), "agg_out_bias": (d,),
        "z": (n_envs, p, n),
    }


def random_nonlinear(rng, n_envs=2, d=2, p=1, h=3, hc=2, he=2, n=5, scale=1.0) -> NonlinearModel:
    shapes = nonlinear_shapes(n_envs, d, p, h, hc, he, n)
    return NonlinearModel(**{k: scale * rng.normal(size=s) for k, s in shapes.items()}, leaky_slope=0.01)


def zero_nonlinear(n_envs=2, d=2, p=1, h=3, hc=2, he=2, n=5) -> NonlinearModel:
    shapes = nonlinear_shapes(n_envs, d, p, h, hc, he, n)
    return NonlinearModel(**{k: np.zeros(s) for k, s in shapes.items()}, leaky_slope=0.01)


def random_linear(rng, n_envs=2, d=3, p=1, n=6) -> LinearModel:
    return LinearModel(
        w0=rng.normal(size=(d, d + p)),
        wk=rng.normal(size=(n_envs, d, d)),
        z=rng.normal(size=(n_envs, p, n)),
    )


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def tiny_dataset(rng):
    """N=2, d=3, T=7"""
    return MultiEnvDataset.from_array(rng.normal(size=(2, 3, 7)))


@pytest.fixture
def small_config():
    return GenConfig(
        d=4, p=1, e=0.5, n_envs=3, n_intervened=1, T=120, burn_in=50,
        mechanism="linear", seed=7,
    )


@pytest.fixture
def config_file(tmp_path):
    """Write a GenConfig JSON and return its path"""
    def _write(**fields):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(fields), encoding="utf-8")
        return str(path)
    return _write
