"""Finite-difference gradient oracle shared by the test modules.

Central differences with step 1e-4 in float64. Error metric per
component: |analytic - numeric| / max(1, |numeric|), i.e. relative with
an absolute floor so near-zero gradients are compared absolutely.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from fusionette import Tape, Tensor, backward

STEP = 1e-4


def numeric_grad(f: Callable[[], float], x: np.ndarray, eps: float = STEP) -> np.ndarray:
    """Central finite differences of the scalar f() wrt the array x (mutated in place)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f()
        flat[i] = orig - eps
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def analytic_grads(build: Callable[[], Tensor], wrt: Sequence[Tensor]) -> list[np.ndarray]:
    """Run one taped forward + backward; returns a grad per tensor in wrt."""
    for t in wrt:
        t.grad = None
    with Tape():
        loss = build()
        backward(loss)
    return [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in wrt]


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def check_grads(build: Callable[[], Tensor], wrt: Sequence[Tensor], tol: float = 1e-4) -> float:
    """Assert analytic gradients match finite differences for every tensor in wrt."""
    analytic = analytic_grads(build, wrt)

    worst = 0.0
    for t, a in zip(wrt, analytic):
        n = numeric_grad(lambda: build().item(), t.data)
        worst = max(worst, max_rel_err(a, n))
    assert worst < tol, f"gradient mismatch: max relative error {worst:.3e} >= {tol:.0e}"
    return worst
