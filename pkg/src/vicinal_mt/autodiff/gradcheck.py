"""Central finite-difference gradient checker (float64)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad, record_relu_masks


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped_kinks: int
    per_tensor: dict[str, float] = field(default_factory=dict)

    def ok(self, tol: float = 1e-3) -> bool:
        return self.checked > 0 and self.max_rel_error <= tol


def _eval(fn: Callable[[], Tensor]) -> tuple[float, list[np.ndarray]]:
    with no_grad(), record_relu_masks() as masks:
        value = float(fn().data)
    return value, masks


def gradcheck(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    names: Sequence[str] | None = None,
    h: float = 1e-3,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckResult:
    """Compare backprop gradients with central differences.

    ``fn`` must rebuild the loss from the current parameter values each call.
    Relative error is measured per tensor as ``|a - n| / max(|a|, |n|)`` in
    the L2 norm over the checked entries.  Stencils whose +h and -h
    evaluations see different relu activation patterns are skipped; they are
    not differentiable within the stencil.
    """
    names = list(names) if names is not None else [f"p{i}" for i in range(len(params))]
    for p in params:
        if p.dtype != np.float64:
            raise TypeError("gradcheck needs float64 parameters")
        p.grad = None
    loss = fn()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = rng or np.random.default_rng(0)
    worst = 0.0
    checked = skipped = 0
    per_tensor = {}
    for name, p, ga in zip(names, params, analytic):
        flat_idx = np.arange(p.size)
        if max_entries is not None and p.size > max_entries:
            flat_idx = np.sort(rng.choice(p.size, size=max_entries, replace=False))
        a_vals, n_vals = [], []
        for fi in flat_idx:
            idx = np.unravel_index(fi, p.shape)
            orig = p.data[idx]
            p.data[idx] = orig + h
            fp, mp = _eval(fn)
            p.data[idx] = orig - h
            fm, mm = _eval(fn)
            p.data[idx] = orig
            if any(not np.array_equal(x, y) for x, y in zip(mp, mm)):
                skipped += 1
                continue
            a_vals.append(ga[idx])
            n_vals.append((fp - fm) / (2 * h))
        if not a_vals:
            continue
        a = np.asarray(a_vals)
        n = np.asarray(n_vals)
        denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-7)
        err = float(np.linalg.norm(a - n) / denom)
        per_tensor[name] = err
        worst = max(worst, err)
        checked += len(a_vals)
    for p in params:
        p.grad = None
    return GradCheckResult(worst, checked, skipped, per_tensor)
