"""Central finite-difference gradient checking.

Ran in double precision; single precision makes the difference quotient too
noisy to trust at the tolerances used here.
"""

from __future__ import annotations

import numpy as np


def numeric_gradient(f, x, step: float = 1e-5):
    """Central finite-difference gradient of scalar-valued f at x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Max elementwise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def check_gradient(f, analytic_grad, x, step: float = 1e-5, tol: float = 1e-4) -> float:
    """Assert the analytic gradient of f at x against central differences."""
    num = numeric_gradient(f, x, step)
    err = relative_error(analytic_grad, num)
    if err >= tol:
        raise AssertionError(f"gradient check failed: relative error {err:.3e} >= {tol:.0e}")
    return err
