"""
Tests for dataset persistence and standardization
"""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from invargc.models.domain import LinearModel, MultiEnvDataset
from invargc.models.schemas import FitResult, GenConfig, HyperParams
from invargc.services.datagen_service import generate_benchmark
from invargc.services.dataset_service import dataset_service, standardize
from invargc.utils.constants import FitMode
from invargc.utils.error_handler import ConfigValidationError, DataFormatError, ShapeMismatchError


class TestStandardize:
    def test_single_trajectory(self):
        ds = MultiEnvDataset.from_array([[[1.0, 2.0, 3.0]]])
        np.testing.assert_allclose(standardize(ds).series[0, 0], [-1.0, 0.0, 1.0])

    def test_constant_trajectory_maps_to_zero(self):
        ds = MultiEnvDataset.from_array([[[4.0, 4.0, 4.0, 4.0], [1.0, 2.0, 3.0, 5.0]]])
        out = standardize(ds).series
        assert np.all(out[0, 0] == 0.0)
        assert np.all(np.isfinite(out))

    def test_tiny_varying_trajectory_is_scaled(self):
        ds = MultiEnvDataset.from_array([[[1e-13, 2e-13, 3e-13, 2.5e-13]]])
        out = standardize(ds).series[0, 0]
        assert np.std(out, ddof=1) == pytest.approx(1.0)
        assert out.mean() == pytest.approx(0.0, abs=1e-12)

    def test_repeated_non_representable_value_maps_to_zero(self):
        ds = MultiEnvDataset.from_array([[[0.1] * 7]])
        assert np.all(standardize(ds).series == 0.0)

    def test_mean_zero_sd_one(self, rng):
        ds = MultiEnvDataset.from_array(3.0 + 5.0 * rng.normal(size=(3, 4, 50)))
        out = standardize(ds).series
        np.testing.assert_allclose(out.mean(axis=2), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=2, ddof=1), 1.0, atol=1e-12)

    def test_idempotent(self, rng):
        ds = MultiEnvDataset.from_array(rng.normal(size=(2, 3, 40)))
        once = standardize(ds)
        np.testing.assert_allclose(standardize(once).series, once.series, atol=1e-12)

    def test_input_untouched(self, tiny_dataset):
        before = tiny_dataset.series.copy()
        standardize(tiny_dataset)
        np.testing.assert_array_equal(tiny_dataset.series, before)


class TestDatasetModel:
    def test_rejects_short_series(self):
        with pytest.raises(ValidationError):
            MultiEnvDataset.from_array(np.zeros((1, 2, 1)))

    def test_rejects_non_finite(self):
        series = np.zeros((1, 2, 4))
        series[0, 1, 2] = np.nan
        with pytest.raises(ValidationError):
            MultiEnvDataset.from_array(series)

    def test_inputs_and_targets(self, tiny_dataset):
        assert tiny_dataset.inputs.shape == (2, 3, 6)
        np.testing.assert_array_equal(tiny_dataset.targets[:, :, 0], tiny_dataset.series[:, :, 1])


class TestDatasetFiles:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        ds = MultiEnvDataset.from_array(rng.normal(size=(3, 2, 9)) * 1e3, var_names=["a", "b"])
        dataset_service.save_dataset(ds, tmp_path / "data")
        loaded = dataset_service.load_dataset(tmp_path / "data")

        assert loaded.var_names == ["a", "b"]
        np.testing.assert_array_equal(loaded.series, ds.series)

    def test_layout(self, tmp_path, tiny_dataset):
        dataset_service.save_dataset(tiny_dataset, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())

        assert manifest["n_envs"] == 2 and manifest["n_vars"] == 3 and manifest["n_steps"] == 7
        lines = (tmp_path / "env_1.csv").read_text().strip().splitlines()
        assert lines[0] == "x0,x1,x2"
        assert len(lines) == 8

    def test_non_numeric_cell_reports_position(self, tmp_path, tiny_dataset):
        dataset_service.save_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "env_0.csv"
        lines = path.read_text().splitlines()
        cells = lines[3].split(",")
        cells[1] = "abc"
        lines[3] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n")

        with pytest.raises(DataFormatError) as exc:
            dataset_service.load_dataset(tmp_path)
        assert exc.value.details["row"] == 4
        assert exc.value.details["column"] == 2
        assert exc.value.exit_code == 3

    def test_missing_row(self, tmp_path, tiny_dataset):
        dataset_service.save_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "env_1.csv"
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")

        with pytest.raises(DataFormatError):
            dataset_service.load_dataset(tmp_path)

    def test_invalid_utf8_reports_offset(self, tmp_path, tiny_dataset):
        dataset_service.save_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "env_0.csv"
        path.write_bytes(b"x0,x1,x2\n" + b"\xff\xfe\n")

        with pytest.raises(DataFormatError) as exc:
            dataset_service.load_dataset(tmp_path)
        assert exc.value.exit_code == 3
        assert exc.value.details["byte_offset"] == 9

    def test_invalid_utf8_manifest(self, tmp_path, tiny_dataset):
        dataset_service.save_dataset(tiny_dataset, tmp_path)
        (tmp_path / "manifest.json").write_bytes(b"{\"n_envs\": \xff}")

        with pytest.raises(DataFormatError) as exc:
            dataset_service.load_dataset(tmp_path)
        assert exc.value.details["byte_offset"] == 11

    def test_trailing_blank_lines_are_skipped(self, tmp_path, tiny_dataset):
        dataset_service.save_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "env_1.csv"
        path.write_text(path.read_text() + "\n\n")

        loaded = dataset_service.load_dataset(tmp_path)
        np.testing.assert_array_equal(loaded.series, tiny_dataset.series)

    def test_blank_line_inside_data(self, tmp_path, tiny_dataset):
        dataset_service.save_dataset(tiny_dataset, tmp_path)
        path = tmp_path / "env_1.csv"
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:3] + [""] + lines[3:]) + "\n")

        with pytest.raises(DataFormatError) as exc:
            dataset_service.load_dataset(tmp_path)
        assert exc.value.details["row"] == 4

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataFormatError) as exc:
            dataset_service.load_dataset(tmp_path / "nowhere")
        assert exc.value.exit_code == 3


class TestArtifacts:
    def test_truth_round_trip(self, tmp_path, small_config):
        _, truth = generate_benchmark(small_config)
        dataset_service.save_truth(truth, tmp_path / "graph.json")
        loaded = dataset_service.load_truth(tmp_path / "graph.json")

        np.testing.assert_array_equal(loaded.adjacency, truth.adjacency)
        np.testing.assert_array_equal(loaded.obs_weights, truth.obs_weights)
        np.testing.assert_array_equal(loaded.intervention_mask, truth.intervention_mask)
        np.testing.assert_array_equal(loaded.latent_series, truth.latent_series)
        np.testing.assert_array_equal(loaded.latent_dynamics, truth.latent_dynamics)
        assert loaded.latent_children == truth.latent_children

    def test_truth_without_latents(self, tmp_path, small_config):
        _, truth = generate_benchmark(small_config.model_copy(update={"p": 0}))
        dataset_service.save_truth(truth, tmp_path / "graph.json")
        loaded = dataset_service.load_truth(tmp_path / "graph.json")
        assert loaded.n_latents == 0
        assert loaded.latent_series.shape[:2] == (small_config.n_envs, 0)

    @pytest.mark.parametrize("p", [0, 2])
    def test_linear_model_round_trip(self, tmp_path, rng, p):
        model = LinearModel(
            w0=rng.normal(size=(3, 3 + p)), wk=rng.normal(size=(2, 3, 3)), z=rng.normal(size=(2, p, 5))
        )
        hp = HyperParams.defaults(6, n_latents=p)
        result = FitResult(mode=FitMode.LINEAR, model=model, trace=[3.0, 2.0], n_iters=1,
                           converged=False, hyperparams=hp)
        dataset_service.save_model(result, tmp_path / "model.json")
        loaded = dataset_service.load_model(tmp_path / "model.json")

        assert loaded.mode == FitMode.LINEAR
        assert loaded.hyperparams == hp
        np.testing.assert_array_equal(loaded.model.w0, model.w0)
        np.testing.assert_array_equal(loaded.model.wk, model.wk)
        assert loaded.model.z.shape[:2] == (2, p)
        assert loaded.final_objective == 2.0

    def test_identical_results_give_identical_bytes(self, tmp_path, rng):
        model = LinearModel(w0=rng.normal(size=(2, 3)), wk=rng.normal(size=(1, 2, 2)), z=rng.normal(size=(1, 1, 4)))
        result = FitResult(mode=FitMode.LINEAR, model=model, trace=[1.0], n_iters=0,
                           converged=True, hyperparams=HyperParams.defaults(5))
        dataset_service.save_model(result, tmp_path / "a.json")
        dataset_service.save_model(result, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_model_truth_mismatch(self, rng, small_config):
        _, truth = generate_benchmark(small_config)
        model = LinearModel.zeros(small_config.n_envs, small_config.d + 1, 0, 5)
        result = FitResult(mode=FitMode.LINEAR, model=model, trace=[0.0], n_iters=0,
                           converged=True, hyperparams=HyperParams.defaults(6, n_latents=0))
        with pytest.raises(ShapeMismatchError):
            dataset_service.check_model_against_truth(result, truth)


class TestGenConfigFile:
    def test_load(self, config_file):
        cfg = dataset_service.load_gen_config(config_file(d=4, mechanism="linear"))
        assert cfg == GenConfig(d=4, mechanism="linear")

    def test_out_of_range_field_is_named(self, config_file):
        with pytest.raises(ConfigValidationError) as exc:
            dataset_service.load_gen_config(config_file(e=1.5))
        assert exc.value.exit_code == 2
        fields = [e["field"] for e in exc.value.details["validation_errors"]]
        assert "e" in fields

    def test_unknown_key_rejected(self, config_file):
        with pytest.raises(ConfigValidationError):
            dataset_service.load_gen_config(config_file(edges=3))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(DataFormatError):
            dataset_service.load_gen_config(path)
