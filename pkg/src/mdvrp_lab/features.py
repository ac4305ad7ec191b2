"""Polar node features relative to the first depot."""
from __future__ import annotations

import numpy as np

from .core import Instance

TWO_PI = 2.0 * np.pi


def to_polar(inst: Instance) -> np.ndarray:
    """Return an ``(n_depots + n_customers, 3)`` matrix of (r, theta, demand/C).

    Rows follow the package node order (depots first).  theta lies in
    [0, 2*pi) and is 0 for any node sitting exactly on depot 0.
    """
    rel = inst.nodes - inst.depots[0]
    r = np.hypot(rel[:, 0], rel[:, 1])
    theta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), TWO_PI)
    # mod can round a tiny negative angle up to exactly 2*pi
    theta[theta >= TWO_PI] = 0.0
    theta[r == 0.0] = 0.0
    dem = np.zeros(inst.n_nodes)
    dem[inst.n_depots:] = inst.demand / inst.capacity
    return np.stack([r, theta, dem], axis=1)
