"""Central-difference check of reverse-mode gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .autograd import Tensor


def grad_check(f: Callable[..., Tensor], point: Sequence[np.ndarray], eps: float = 1e-5) -> float:
    """Max relative error between autodiff and central differences.

    ``f`` receives one :class:`Tensor` per array in ``point`` and must
    return a scalar.  Error per coordinate is
    ``|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)``.
    """
    base = [np.array(p, dtype=np.float64, copy=True) for p in point]
    leaves = [Tensor(p.copy(), requires_grad=True) for p in base]
    out = f(*leaves)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    if not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite function value")
    out.backward()
    worst = 0.0
    for li, arr in enumerate(base):
        g_ad = leaves[li].grad if leaves[li].grad is not None else np.zeros_like(arr)
        flat = arr.reshape(-1)
        for j in range(flat.size):
            vals = []
            for sign in (1.0, -1.0):
                probe = [b.copy() for b in base]
                probe[li].reshape(-1)[j] += sign * eps
                val = f(*[Tensor(p) for p in probe]).data
                if not np.all(np.isfinite(val)):
                    raise FloatingPointError("non-finite value during finite differences")
                vals.append(float(val))
            g_fd = (vals[0] - vals[1]) / (2 * eps)
            ga = float(g_ad.reshape(-1)[j])
            err = abs(ga - g_fd) / max(1.0, abs(ga), abs(g_fd))
            worst = max(worst, err)
    return worst
