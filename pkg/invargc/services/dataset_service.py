"""
Dataset service: on-disk persistence of datasets, ground truth, models and reports
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from invargc import __version__
from invargc.config import settings
from invargc.models.domain import GroundTruth, LinearModel, MultiEnvDataset, NonlinearModel
from invargc.models.schemas import FitResult, GenConfig, HyperParams, NonlinearArch
from invargc.utils.constants import (
    CSV_FLOAT_FORMAT,
    ENV_FILE_TEMPLATE,
    GRAPH_FILE,
    MANIFEST_FILE,
    FitMode,
)
from invargc.utils.error_handler import (
    DataFormatError,
    DataIOError,
    ShapeMismatchError,
    validation_error_from_pydantic,
)
from invargc.utils.helpers import to_jsonable
from invargc.utils.logger import logger

PathLike = Union[str, Path]


def standardize(ds: MultiEnvDataset) -> MultiEnvDataset:
    """
    Z-score every (environment, variable) trajectory

    Args:
        ds: Dataset to transform (left untouched)

    Returns:
        New dataset with mean 0 and sample sd 1 per trajectory; constant trajectories map to 0
    """
    series = np.asarray(ds.series, dtype=float)
    centred = series - series.mean(axis=2, keepdims=True)
    sd = series.std(axis=2, ddof=1, keepdims=True)
    # exact repeats, or spread at rounding level relative to the trajectory magnitude
    repeated = np.all(series == series[:, :, :1], axis=2, keepdims=True)
    constant = repeated | (sd <= 1e-12 * np.abs(series).max(axis=2, keepdims=True))
    out = np.where(constant, 0.0, centred / np.where(constant, 1.0, sd))
    return MultiEnvDataset(series=out, var_names=list(ds.var_names))


class DatasetService:
    """Read and write dataset directories and JSON artifacts"""

    # ============================================
    # JSON helpers
    # ============================================

    def write_json(self, path: PathLike, payload: Any) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8") as handle:
                json.dump(to_jsonable(payload), handle, indent=2, allow_nan=False)
                handle.write("\n")
        except OSError as e:
            raise DataIOError(f"Cannot write {path}: {e}", str(path))

    def read_json(self, path: PathLike) -> Dict[str, Any]:
        path = Path(path)
        if not path.is_file():
            raise DataFormatError("file not found", file=str(path))
        text = self._read_text(path)
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"invalid JSON: {e.msg}", file=str(path), row=e.lineno, column=e.colno)

    def _read_text(self, path: Path) -> str:
        """Read a whole file as UTF-8; undecodable bytes are reported by offset"""
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise DataIOError(f"Cannot read {path}: {e}", str(path))
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataFormatError(
                f"invalid UTF-8 byte 0x{raw[e.start]:02x}", file=str(path), byte_offset=e.start
            )

    def write_text(self, path: PathLike, text: str) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"Cannot write {path}: {e}", str(path))

    def load_gen_config(self, path: PathLike) -> GenConfig:
        """Parse a generator configuration; invalid fields raise ConfigValidationError"""
        raw = self.read_json(path)
        if not isinstance(raw, dict):
            raise DataFormatError("configuration must be a JSON object", file=str(path))
        try:
            return GenConfig(**raw)
        except PydanticValidationError as e:
            raise validation_error_from_pydantic(e, f"configuration {path}")

    def save_gen_config(self, cfg: GenConfig, path: PathLike) -> None:
        self.write_json(path, cfg.model_dump(mode="json"))

    # ============================================
    # Datasets
    # ============================================

    def save_dataset(
        self,
        ds: MultiEnvDataset,
        path: PathLike,
        truth: Optional[GroundTruth] = None
    ) -> None:
        """
        Write manifest.json, env_<k>.csv and, when truth is given, graph.json

        Args:
            ds: Dataset to persist
            path: Target directory (created if missing)
            truth: Optional generator ground truth
        """
        root = Path(path)
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataIOError(f"Cannot create {root}: {e}", str(root))

        self.write_json(root / MANIFEST_FILE, {
            "n_envs": ds.n_envs,
            "n_vars": ds.n_vars,
            "n_steps": ds.n_steps,
            "var_names": list(ds.var_names),
        })

        for k in range(ds.n_envs):
            env_path = root / ENV_FILE_TEMPLATE.format(k=k)
            try:
                np.savetxt(
                    env_path,
                    ds.series[k].T,
                    delimiter=",",
                    header=",".join(ds.var_names),
                    comments="",
                    fmt=CSV_FLOAT_FORMAT,
                )
            except OSError as e:
                raise DataIOError(f"Cannot write {env_path}: {e}", str(env_path))

        if truth is not None:
            self.save_truth(truth, root / GRAPH_FILE)

        logger.debug(f"Saved dataset with {ds.n_envs} environments to {root}")

    def load_dataset(self, path: PathLike) -> MultiEnvDataset:
        """
        Load a dataset directory written by save_dataset

        Args:
            path: Directory containing manifest.json and env_<k>.csv

        Returns:
            Validated dataset in manifest environment order
        """
        root = Path(path)
        manifest_path = root / MANIFEST_FILE
        manifest = self.read_json(manifest_path)

        try:
            n_envs = int(manifest["n_envs"])
            n_vars = int(manifest["n_vars"])
            n_steps = int(manifest["n_steps"])
            var_names = [str(v) for v in manifest.get("var_names") or [f"x{i}" for i in range(n_vars)]]
        except (KeyError, TypeError, ValueError) as e:
            raise DataFormatError(f"manifest field missing or invalid: {e}", file=str(manifest_path))
        if len(var_names) != n_vars:
            raise DataFormatError(
                f"manifest lists {len(var_names)} var_names for n_vars={n_vars}", file=str(manifest_path)
            )

        series = np.empty((n_envs, n_vars, n_steps))
        for k in range(n_envs):
            series[k] = self._read_env_csv(root / ENV_FILE_TEMPLATE.format(k=k), n_vars, n_steps).T

        try:
            return MultiEnvDataset(series=series, var_names=var_names)
        except PydanticValidationError as e:
            raise DataFormatError(str(e.errors()[0]["msg"]), file=str(root))

    def _read_env_csv(self, path: Path, n_vars: int, n_steps: int) -> np.ndarray:
        """Parse one env CSV into a T x d array, reporting 1-based row/column of any defect"""
        if not path.is_file():
            raise DataFormatError("file not found", file=str(path))

        rows: List[List[float]] = []
        reader = csv.reader(io.StringIO(self._read_text(path), newline=""))
        header = next(reader, None)
        if header is None:
            raise DataFormatError("empty file", file=str(path), row=1)
        if len(header) != n_vars:
            raise DataFormatError(
                f"header has {len(header)} columns, manifest says n_vars={n_vars}",
                file=str(path), row=1,
            )
        blank_row: Optional[int] = None
        for row_idx, cells in enumerate(reader, start=2):
            # blank lines are allowed only at the end of the file
            if not cells:
                blank_row = blank_row or row_idx
                continue
            if blank_row is not None:
                raise DataFormatError("blank line inside the data", file=str(path), row=blank_row)
            if len(cells) != n_vars:
                raise DataFormatError(
                    f"row has {len(cells)} columns, manifest says n_vars={n_vars}",
                    file=str(path), row=row_idx,
                )
            values = []
            for col_idx, cell in enumerate(cells, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"non-numeric cell {cell!r}", file=str(path), row=row_idx, column=col_idx
                    )
                if not math.isfinite(value):
                    raise DataFormatError(
                        f"non-finite value {cell!r}", file=str(path), row=row_idx, column=col_idx
                    )
                values.append(value)
            rows.append(values)

        if len(rows) != n_steps:
            raise DataFormatError(
                f"{len(rows)} data rows, manifest says n_steps={n_steps}", file=str(path)
            )
        return np.asarray(rows, dtype=float).reshape(n_steps, n_vars)

    # ============================================
    # Ground truth
    # ============================================

    def truth_to_dict(self, truth: GroundTruth) -> Dict[str, Any]:
        return {
            "adjacency": truth.adjacency.astype(int),
            "base_weights": truth.base_weights,
            "latent_children": [list(map(int, c)) for c in truth.latent_children],
            "latent_to_obs": truth.latent_to_obs,
            "latent_dynamics": np.diag(truth.latent_dynamics),
            "obs_weights": truth.obs_weights,
            "intervention_mask": truth.intervention_mask.astype(int),
            "latent_series": truth.latent_series,
        }

    def save_truth(self, truth: GroundTruth, path: PathLike) -> None:
        self.write_json(path, self.truth_to_dict(truth))

    def load_truth(self, path: PathLike) -> GroundTruth:
        """Load graph.json; base_weights falls back to obs_weights of the first unmasked environment"""
        path = Path(path)
        raw = self.read_json(path)
        try:
            adjacency = np.asarray(raw["adjacency"], dtype=float)
            d = adjacency.shape[0]
            obs_weights = np.asarray(raw["obs_weights"], dtype=float).reshape(-1, d, d)
            n_envs = obs_weights.shape[0]
            mask = np.asarray(raw["intervention_mask"], dtype=float).reshape(n_envs, d, d)
            dynamics = np.asarray(raw["latent_dynamics"], dtype=float).reshape(-1)
            p = dynamics.shape[0]
            if "base_weights" in raw:
                base = np.asarray(raw["base_weights"], dtype=float)
            else:
                clean = [k for k in range(n_envs) if not mask[k].any()]
                base = obs_weights[clean[0]] if clean else np.where(mask[0] == 0, obs_weights[0], 0.0)
            latent_series = np.asarray(raw["latent_series"], dtype=float)
            if latent_series.size == 0:
                latent_series = latent_series.reshape(n_envs, p, -1) if p else np.zeros((n_envs, 0, 0))
            return GroundTruth(
                adjacency=adjacency,
                base_weights=base,
                latent_children=raw.get("latent_children", []),
                latent_dynamics=np.diag(dynamics),
                latent_to_obs=np.asarray(raw["latent_to_obs"], dtype=float).reshape(p, d),
                obs_weights=obs_weights,
                intervention_mask=mask,
                latent_series=latent_series,
            )
        except (KeyError, ValueError, TypeError, IndexError, PydanticValidationError) as e:
            raise DataFormatError(f"invalid ground truth: {e}", file=str(path))

    # ============================================
    # Models
    # ============================================

    def fit_result_to_dict(self, result: FitResult) -> Dict[str, Any]:
        """model.json payload; no timestamps so identical fits give identical bytes"""
        payload: Dict[str, Any] = {
            "mode": result.mode.value,
            "version": __version__,
            "hyperparams": result.hyperparams.model_dump(mode="json"),
            "n_iters": result.n_iters,
            "converged": result.converged,
            "final_objective": result.final_objective,
            "objective_trace_tail": result.trace[-settings.TRACE_TAIL:],
        }
        if result.mode == FitMode.LINEAR:
            payload.update(result.model.tensors())
        else:
            payload["dims"] = result.model.dims
            payload["arch"] = result.arch.model_dump(mode="json") if result.arch else None
            payload["tensors"] = result.model.tensors()
        return payload

    def save_model(self, result: FitResult, path: PathLike) -> None:
        self.write_json(path, self.fit_result_to_dict(result))

    def load_model(self, path: PathLike) -> FitResult:
        path = Path(path)
        raw = self.read_json(path)
        try:
            mode = FitMode(raw["mode"])
            hp = HyperParams(**raw["hyperparams"])
            if mode == FitMode.LINEAR:
                model: Union[LinearModel, NonlinearModel] = self._linear_from_raw(raw)
                arch = None
            else:
                arch = NonlinearArch(**raw["arch"]) if raw.get("arch") else NonlinearArch()
                tensors = {name: np.asarray(v, dtype=float) for name, v in raw["tensors"].items()}
                if tensors["z"].size == 0:
                    tensors["z"] = np.zeros((tensors["g_first"].shape[0], 0, 0))
                model = NonlinearModel(**tensors, leaky_slope=arch.leaky_slope)
            trace = [float(v) for v in raw.get("objective_trace_tail") or [raw.get("final_objective", 0.0)]]
            return FitResult(
                mode=mode,
                model=model,
                trace=trace,
                n_iters=int(raw.get("n_iters", 0)),
                converged=bool(raw.get("converged", False)),
                hyperparams=hp,
                arch=arch,
            )
        except (KeyError, ValueError, TypeError, PydanticValidationError) as e:
            raise DataFormatError(f"invalid model file: {e}", file=str(path))

    @staticmethod
    def _linear_from_raw(raw: Dict[str, Any]) -> LinearModel:
        w0 = np.asarray(raw["w0"], dtype=float)
        d = w0.shape[0]
        wk = np.asarray(raw["wk"], dtype=float).reshape(-1, d, d)
        p = w0.shape[1] - d
        z = np.asarray(raw["z"], dtype=float)
        if z.size == 0:
            z = z.reshape(wk.shape[0], p, -1) if p else np.zeros((wk.shape[0], 0, 0))
        return LinearModel(w0=w0, wk=wk, z=z)

    @staticmethod
    def check_model_against_truth(result: FitResult, truth: GroundTruth) -> None:
        """Raise ShapeMismatchError when model and graph.json disagree on N or d"""
        model = result.model
        if model.n_vars != truth.n_vars or model.n_envs != truth.n_envs:
            raise ShapeMismatchError(
                f"model has N={model.n_envs}, d={model.n_vars}; truth has N={truth.n_envs}, d={truth.n_vars}",
                details={"model": [model.n_envs, model.n_vars], "truth": [truth.n_envs, truth.n_vars]},
            )


# Global service instance
dataset_service = DatasetService()
