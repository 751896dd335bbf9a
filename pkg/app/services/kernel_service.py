"""
Scalar proximity kernels used inside the weight formulas.
"""
from typing import Callable, Union

import numpy as np

from app.schemas.aggregation import KernelKind, KernelSpec

KernelFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def scalar_distance(a: float, b: float) -> float:
    """Distance between two machine predictions on the real line."""
    return abs(float(a) - float(b))


def kernel_eval_array(spec: KernelSpec, a, b) -> np.ndarray:
    """Kernel values over broadcast arrays of predictions; all in [0, 1]."""
    distance = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    h = spec.bandwidth
    if spec.kind == KernelKind.EXPONENTIAL:
        return np.exp(-h * distance)
    if spec.kind == KernelKind.GAUSSIAN:
        return np.exp(-h * distance ** 2)
    if spec.kind == KernelKind.THRESHOLD:
        return (distance <= h).astype(float)
    if spec.kind == KernelKind.TRIANGULAR:
        return np.maximum(0.0, 1.0 - distance / h)
    raise ValueError(f"Unknown kernel kind: {spec.kind}")


def kernel_eval(spec: KernelSpec, a: float, b: float) -> float:
    """K(a, b) for one pair of predictions."""
    return float(kernel_eval_array(spec, a, b))


def as_kernel_fn(kernel: Union[KernelSpec, KernelFn]) -> KernelFn:
    """Accept either a KernelSpec or a user-supplied vectorised kernel."""
    if isinstance(kernel, KernelSpec):
        return lambda a, b: kernel_eval_array(kernel, a, b)
    return kernel
