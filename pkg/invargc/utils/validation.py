"""
Numerical self-test battery run by the `check` command
"""

from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from invargc.config import settings
from invargc.models.domain import LinearModel, MultiEnvDataset, NonlinearModel, ScoredLabels
from invargc.models.schemas import GenConfig, HyperParams
from invargc.utils.helpers import make_rng
from invargc.utils.logger import logger

ProxFn = Callable[[LinearModel, float, HyperParams], LinearModel]

PROX_CASES = 100
PROX_TOLERANCE = 1e-6
LINEAR_GRADIENT_TOLERANCE = 1e-5
NONLINEAR_GRADIENT_TOLERANCE = 1e-3
METRIC_CASES = 1000
METRIC_TOLERANCE = 1e-12
MONOTONE_CASES = 20
MONOTONE_SLACK = 1e-10
STATIONARITY_CASES = 20
FD_STEP = 1e-6


def _passed(cases: int, max_error: float) -> Dict[str, Any]:
    return {"status": "passed", "cases": cases, "max_error": max_error}


def _failed(cases: int, max_error: float, case: Dict[str, Any]) -> Dict[str, Any]:
    return {"status": "failed", "cases": cases, "max_error": max_error, "failing_case": case}


def prox_by_dual_descent(
    v: np.ndarray,
    groups: List[Tuple[np.ndarray, float]],
    max_sweeps: int = 5000,
    tol: float = 1e-14
) -> np.ndarray:
    """
    Prox of sum_g t_g ||x_g|| by block coordinate descent on the dual

    x = v - sum_g u_g with every u_g projected onto the ball of radius t_g over
    its group; groups are visited outermost first.
    """
    duals = [np.zeros(len(idx)) for idx, _ in groups]
    total = np.zeros_like(v)
    for _ in range(max_sweeps):
        change = 0.0
        for g, (idx, radius) in enumerate(groups):
            total[idx] -= duals[g]
            target = v[idx] - total[idx]
            norm = np.linalg.norm(target)
            new = target if norm <= radius else target * (radius / norm)
            change = max(change, float(np.max(np.abs(new - duals[g]))) if len(idx) else 0.0)
            duals[g] = new
            total[idx] += new
        if change < tol:
            break
    return v - total


def linear_penalty_groups(model: LinearModel, step: float, hp: HyperParams) -> List[Tuple[np.ndarray, float]]:
    """Index groups of the flattened (w0, wk, z) vector with their prox radii, outer groups first"""
    n_envs, d, p, n = model.n_envs, model.n_vars, model.n_latents, model.n_inputs
    w0_idx = np.arange(d * (d + p)).reshape(d, d + p)
    wk_idx = w0_idx.size + np.arange(n_envs * d * d).reshape(n_envs, d, d)
    z_idx = w0_idx.size + wk_idx.size + np.arange(n_envs * p * n).reshape(n_envs, p, n)

    outer = step * hp.lambda_w * (1.0 - hp.alpha)
    inner = step * hp.lambda_w * hp.alpha
    groups: List[Tuple[np.ndarray, float]] = []
    for i in range(d):
        for j in range(d + p):
            members = [w0_idx[i, j]] + ([int(x) for x in wk_idx[:, i, j]] if j < d else [])
            groups.append((np.array(members), outer))
    groups += [(np.array([int(x)]), inner) for x in wk_idx.ravel()]
    radius_z = step * hp.lambda_z / np.sqrt(max(n, 1))
    groups += [(z_idx[k, l], radius_z) for k in range(n_envs) for l in range(p)]
    return groups


def _flatten(model: LinearModel) -> np.ndarray:
    return np.concatenate([model.w0.ravel(), model.wk.ravel(), model.z.ravel()])


def _random_dataset(rng: np.random.Generator, n_envs: int, d: int, n_steps: int) -> MultiEnvDataset:
    return MultiEnvDataset.from_array(rng.normal(size=(n_envs, d, n_steps)))


class SelfTestBattery:
    """Deterministic oracle checks of the numerical core"""

    def __init__(self, seed: Optional[int] = None, prox_fn: Optional[ProxFn] = None):
        from invargc.services.prox import prox_hierarchical

        self.seed = settings.CHECK_SEED if seed is None else seed
        self.prox_fn = prox_fn or prox_hierarchical

    def _rng(self, offset: int) -> np.random.Generator:
        return make_rng(self.seed + offset)

    def check_prox(self) -> Dict[str, Any]:
        """Prox against the dual descent oracle on random small instances"""
        rng = self._rng(1)
        worst = 0.0
        for case in range(PROX_CASES):
            n_envs, d, p, n = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(0, 3)), 5
            model = LinearModel(
                w0=rng.normal(size=(d, d + p)),
                wk=rng.normal(size=(n_envs, d, d)),
                z=rng.normal(size=(n_envs, p, n)),
            )
            hp = HyperParams(
                lambda_w=float(rng.uniform(0.0, 3.0)),
                alpha=float(rng.uniform(0.05, 0.95)),
                lambda_z=float(rng.uniform(0.0, 5.0)),
                n_latents=p,
            )
            step = float(rng.uniform(0.1, 1.0))
            expected = prox_by_dual_descent(_flatten(model), linear_penalty_groups(model, step, hp))
            actual = _flatten(self.prox_fn(model, step, hp))
            error = float(np.max(np.abs(actual - expected))) if expected.size else 0.0
            worst = max(worst, error)
            if error > PROX_TOLERANCE:
                return _failed(case + 1, worst, {
                    "case": case, "step": step, "hyperparams": hp.model_dump(mode="json"),
                    "shape": {"n_envs": n_envs, "d": d, "p": p}, "error": error,
                })
        return _passed(PROX_CASES, worst)

    def check_linear_gradient(self) -> Dict[str, Any]:
        """smooth_gradient against central finite differences"""
        from invargc.services.linear_solver import smooth_gradient, squared_loss

        rng = self._rng(2)
        ds = _random_dataset(rng, 2, 3, 7)
        model = LinearModel(
            w0=rng.normal(size=(3, 4)), wk=rng.normal(size=(2, 3, 3)), z=rng.normal(size=(2, 1, 6))
        )
        analytic = smooth_gradient(model, ds).tensors()
        worst = 0.0
        for name, value in model.tensors().items():
            numeric = np.zeros_like(value)
            for idx in np.ndindex(value.shape):
                plus, minus = value.copy(), value.copy()
                plus[idx] += FD_STEP
                minus[idx] -= FD_STEP
                numeric[idx] = (
                    squared_loss(model.with_tensors(**{name: plus}), ds)
                    - squared_loss(model.with_tensors(**{name: minus}), ds)
                ) / (2 * FD_STEP)
            error = float(np.linalg.norm(analytic[name] - numeric) / max(np.linalg.norm(numeric), 1e-12))
            worst = max(worst, error)
            if error > LINEAR_GRADIENT_TOLERANCE:
                return _failed(1, worst, {"tensor": name, "relative_error": error})
        return _passed(1, worst)

    def check_nonlinear_gradient(self) -> Dict[str, Any]:
        """backward against central finite differences for every tensor"""
        from invargc.services.nonlinear_solver import backward, ridge_penalty, squared_loss

        rng = self._rng(3)
        n_envs, d, p, h, hc, he, n = 2, 2, 1, 3, 2, 2, 5
        ds = _random_dataset(rng, n_envs, d, n + 1)
        shapes = {
            "f_first": (d, h, d + p), "f_first_bias": (d, h), "f_hidden": (d, h, h), "f_hidden_bias": (d, h),
            "f_out": (d, hc, h), "f_out_bias": (d, hc),
            "g_first": (n_envs, d, h, d), "g_first_bias": (n_envs, d, h),
            "g_hidden": (n_envs, d, h, h), "g_hidden_bias": (n_envs, d, h),
            "g_out": (n_envs, d, hc, h), "g_out_bias": (n_envs, d, hc),
            "agg_hidden": (d, he, 2 * hc), "agg_hidden_bias": (d, he), "agg_out": (d, he), "agg_out_bias": (d,),
            "z": (n_envs, p, n),
        }
        model = NonlinearModel(**{k: rng.normal(size=s) for k, s in shapes.items()}, leaky_slope=0.01)
        ridge = 0.1

        def loss(m: NonlinearModel) -> float:
            return squared_loss(m, ds) + ridge_penalty(m, ridge)

        analytic = backward(model, ds, ridge).tensors()
        worst = 0.0
        for name, value in model.tensors().items():
            numeric = np.zeros_like(value)
            for idx in np.ndindex(value.shape):
                plus, minus = value.copy(), value.copy()
                plus[idx] += FD_STEP
                minus[idx] -= FD_STEP
                numeric[idx] = (
                    loss(model.with_tensors(**{name: plus})) - loss(model.with_tensors(**{name: minus}))
                ) / (2 * FD_STEP)
            error = float(np.linalg.norm(analytic[name] - numeric) / max(np.linalg.norm(numeric), 1e-12))
            worst = max(worst, error)
            if error > NONLINEAR_GRADIENT_TOLERANCE:
                return _failed(1, worst, {"tensor": name, "relative_error": error})
        return _passed(1, worst)

    def check_metrics(self) -> Dict[str, Any]:
        """Rank-based AUROC and AP against O(n^2) references on tied instances"""
        from invargc.services.metrics_service import auprc, auprc_enumerate, auroc, auroc_pairwise

        rng = self._rng(4)
        worst = 0.0
        for case in range(METRIC_CASES):
            size = int(rng.integers(2, 30))
            scores = rng.integers(0, 5, size=size).astype(float)
            labels = rng.integers(0, 2, size=size)
            labels[0], labels[-1] = 1, 0
            sl = ScoredLabels.of(scores, labels)
            error = max(
                abs(auroc(sl) - auroc_pairwise(scores, labels)),
                abs(auprc(sl) - auprc_enumerate(scores, labels)),
            )
            worst = max(worst, error)
            if error > METRIC_TOLERANCE:
                return _failed(case + 1, worst, {
                    "case": case, "scores": scores.tolist(), "labels": labels.tolist(), "error": error,
                })
        return _passed(METRIC_CASES, worst)

    def check_monotone_descent(self) -> Dict[str, Any]:
        """Linear solver traces never increase"""
        from invargc.services.datagen_service import generate_benchmark
        from invargc.services.dataset_service import standardize
        from invargc.services.linear_solver import fit_linear

        worst = 0.0
        for case in range(MONOTONE_CASES):
            cfg = GenConfig(d=3, p=1, T=60, burn_in=50, n_intervened=0, mechanism="linear", seed=self.seed + case)
            ds = standardize(generate_benchmark(cfg)[0])
            hp = HyperParams.defaults(ds.n_steps, n_latents=1, max_iters=200)
            trace = np.asarray(fit_linear(ds, hp, seed=case).trace)
            slack = MONOTONE_SLACK * np.maximum(1.0, np.abs(trace[:-1]))
            increase = float(np.max(np.diff(trace) - slack, initial=-np.inf))
            worst = max(worst, float(np.max(np.diff(trace), initial=0.0)))
            if increase > 0:
                return _failed(case + 1, worst, {"case": case, "seed": cfg.seed, "max_increase": increase})
        return _passed(MONOTONE_CASES, worst)

    def check_stationarity(self) -> Dict[str, Any]:
        """Generated environments are stationary and masks mark exactly the changed weights"""
        from invargc.services.datagen_service import (
            apply_interventions,
            sample_graph,
            spectral_radius,
            transition_matrix,
        )

        worst = 0.0
        for case in range(STATIONARITY_CASES):
            cfg = GenConfig(d=5, p=1, e=0.5, n_envs=3, n_intervened=2, seed=self.seed + case)
            rng = make_rng(cfg.seed)
            skeleton = apply_interventions(sample_graph(cfg, rng), cfg, rng)
            radii = [spectral_radius(transition_matrix(skeleton, k)) for k in range(cfg.n_envs)]
            worst = max(worst, max(radii))
            mask_ok = np.array_equal(skeleton.deviation_mask(), skeleton.intervention_mask)
            if max(radii) > 0.9 + 1e-9 or not mask_ok:
                return _failed(case + 1, worst, {"case": case, "seed": cfg.seed, "radii": radii, "mask_ok": mask_ok})
        return _passed(STATIONARITY_CASES, worst)

    def full_validation(self) -> Dict[str, Any]:
        """Run every suite and summarize"""
        logger.info("Starting numerical self-tests...", extra={"seed": self.seed})
        suites = {
            "prox": self.check_prox,
            "linear_gradient": self.check_linear_gradient,
            "nonlinear_gradient": self.check_nonlinear_gradient,
            "metrics": self.check_metrics,
            "monotone_descent": self.check_monotone_descent,
            "datagen_stationarity": self.check_stationarity,
        }
        results: Dict[str, Any] = {}
        for name, suite in suites.items():
            try:
                results[name] = suite()
            except Exception as e:
                logger.error(f"Self-test suite {name} raised", exc_info=e)
                results[name] = {"status": "failed", "cases": 0, "max_error": None,
                                 "failing_case": {"exception": f"{type(e).__name__}: {e}"}}

        failed = [name for name, r in results.items() if r["status"] != "passed"]
        if failed:
            logger.warning(f"Self-tests failed: {', '.join(failed)}")
        else:
            logger.info("All self-tests passed")
        return {"suites": results, "overall_status": "failed" if failed else "passed", "failed": failed}


def run_self_tests(prox_fn: Optional[ProxFn] = None, seed: Optional[int] = None) -> Dict[str, Any]:
    """Run the battery, optionally with an alternative prox implementation"""
    return SelfTestBattery(seed=seed, prox_fn=prox_fn).full_validation()
