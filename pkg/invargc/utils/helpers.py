"""
Helper utility functions
"""

import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) for a 64-bit seed"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn_rngs(rng: np.random.Generator, count: int) -> List[np.random.Generator]:
    """Split independent child streams off a generator"""
    return list(rng.spawn(count))


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    """Leaky ReLU with the given negative slope"""
    return np.where(x > 0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float) -> np.ndarray:
    """Derivative of leaky_relu (taken as slope at 0)"""
    return np.where(x > 0, 1.0, slope)


def as_readonly(array: Any, dtype: Any = float) -> np.ndarray:
    """Copy into a contiguous read-only array"""
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy containers to plain Python for JSON"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def mean_sd(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    """Mean and population standard deviation, None for an empty sequence"""
    if len(values) == 0:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=0))


def format_mean_sd(mean: Optional[float], sd: Optional[float]) -> str:
    """Render 'mean ± sd' with four decimals"""
    if mean is None:
        return "failed"
    return f"{mean:.4f} ± {sd:.4f}"


@contextmanager
def timed() -> Iterator[Dict[str, float]]:
    """Measure wall time of a block in seconds"""
    box = {"seconds": 0.0}
    start = time.perf_counter()
    try:
        yield box
    finally:
        box["seconds"] = time.perf_counter() - start
