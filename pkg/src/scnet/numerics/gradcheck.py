from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numeric_gradient(f: Callable[..., Tensor], arrays: Sequence[np.ndarray], which: int,
                     coords: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. selected flat coordinates of ``arrays[which]``.

    Uses the fourth-order central stencil (points at +-step, +-2 step).
    """
    base = [np.array(a, dtype=np.float64) for a in arrays]
    target = base[which].reshape(-1)
    out = np.empty(len(coords))

    def evaluate() -> float:
        with no_grad():
            return f(*[Tensor(a) for a in base]).item()

    for n, idx in enumerate(coords):
        orig = target[idx]
        vals = []
        for delta in (2 * step, step, -step, -2 * step):
            target[idx] = orig + delta
            vals.append(evaluate())
        target[idx] = orig
        f2p, f1p, f1m, f2m = vals
        out[n] = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * step)
    return out


def grad_check(f: Callable[..., Tensor], inputs: Sequence[np.ndarray], *, step: float = 1e-4,
               max_checks: int | None = None, seed: int = 0, floor: float = 1e-8) -> float:
    """Largest relative error between reverse-mode and finite-difference gradients.

    ``f`` receives one :class:`Tensor` per input and must return a scalar.
    Relative error per coordinate is ``|a - n| / max(|a|, |n|, floor)``. With
    ``max_checks`` set, only that many randomly chosen coordinates per input
    are probed.
    """
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = f(*tensors)
    if out.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    out.backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for i, (a, t) in enumerate(zip(arrays, tensors)):
        analytic = np.zeros(a.size) if t.grad is None else t.grad.reshape(-1)
        coords = np.arange(a.size)
        if max_checks is not None and a.size > max_checks:
            coords = np.sort(rng.choice(a.size, size=max_checks, replace=False))
        numeric = numeric_gradient(f, arrays, i, coords, step)
        an = analytic[coords]
        denom = np.maximum(np.maximum(np.abs(an), np.abs(numeric)), floor)
        worst = max(worst, float(np.max(np.abs(an - numeric) / denom)))
    return worst
