"""
Central finite-difference checks for the network and its layers.

Checks run on float64 shadows of the float32 tensors. Entries whose
perturbation flips a ReLU mask or a max-pool selection are skipped: the
loss is not differentiable across those switches.
"""
from dataclasses import dataclass

import numpy as np

from .network import activation_pattern, loss_and_grad


@dataclass
class GradCheckResult:
    max_relative_error: float
    checked: int
    skipped: int


def relative_error(analytic, numeric, floor=1e-6):
    return np.abs(analytic - numeric) / np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))


def numeric_gradient(f, x, step=1e-3):
    """Central differences of scalar ``f()`` with respect to every entry of ``x`` (modified in place)"""
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + step
        plus = f()
        x[index] = original - step
        minus = f()
        x[index] = original
        grad[index] = (plus - minus) / (2 * step)
    return grad


def check_loss_gradients(params, batch, labels, step=1e-3, max_entries=None, seed=0) -> GradCheckResult:
    """Compare ``loss_and_grad`` against central differences on a float64 shadow"""
    shadow = params.astype(np.float64)
    batch = np.asarray(batch, dtype=np.float64)
    _, grads = loss_and_grad(shadow, batch, labels)
    pattern = activation_pattern(shadow, batch)
    rng = np.random.default_rng(seed)

    worst, checked, skipped = 0.0, 0, 0
    for name, value in shadow.items():
        indices = list(np.ndindex(value.shape))
        if max_entries is not None and len(indices) > max_entries:
            indices = [indices[i] for i in rng.choice(len(indices), max_entries, replace=False)]
        for index in indices:
            original = value[index]
            value[index] = original + step
            plus, plus_pattern = loss_and_grad(shadow, batch, labels)[0], activation_pattern(shadow, batch)
            value[index] = original - step
            minus, minus_pattern = loss_and_grad(shadow, batch, labels)[0], activation_pattern(shadow, batch)
            value[index] = original
            if plus_pattern != pattern or minus_pattern != pattern:
                skipped += 1
                continue
            numeric = (plus - minus) / (2 * step)
            worst = max(worst, float(relative_error(grads[name][index], numeric)))
            checked += 1
    return GradCheckResult(worst, checked, skipped)
