"""Attention-model TSP policy used as the neural per-tour router.

Node 0 of every row is the depot and is the fixed start.  Batches may
contain tours of different sizes: shorter rows are padded with copies of
their depot, and the padding slots are masked out of encoder attention
and of the decoder, so they neither influence the result nor add length.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Instance, Tour
from .env import tour_points
from .nn import (ParamSet, Tensor, concat, encode_nodes, init_encoder, init_uniform, linear,
                 log_softmax, mha, no_grad, tanh_clip)


@dataclass(frozen=True)
class PaddedBatch:
    """Point sets padded to a common length with repeated depot rows.

    ``coords[b, :lengths[b]]`` is the original point list of row ``b``
    (depot first); every later slot holds the depot of that row.
    """
    coords: np.ndarray
    lengths: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.arange(self.coords.shape[1])[None, :] < self.lengths[:, None]

    @classmethod
    def from_points(cls, point_lists: Sequence[np.ndarray]) -> "PaddedBatch":
        if not point_lists:
            raise ValueError("empty batch")
        lengths = np.array([len(p) for p in point_lists], dtype=np.int64)
        if lengths.min() < 1:
            raise ValueError("every point list needs at least its depot")
        width = int(lengths.max())
        coords = np.empty((len(point_lists), width, 2))
        for b, p in enumerate(point_lists):
            p = np.asarray(p, dtype=np.float64)
            coords[b, :len(p)] = p
            coords[b, len(p):] = p[0]
        return cls(coords, lengths)


def init_tsp_params(rng: np.random.Generator, dim: int = 32, layers: int = 2,
                    heads: int = 4) -> ParamSet:
    ps = ParamSet(meta={"kind": "tsp", "dim": dim, "layers": layers, "heads": heads})
    init_encoder(ps, "enc.", rng, 2, dim, layers)
    ps.add("dec.Wctx", init_uniform(rng, (3 * dim, dim), 3 * dim))
    for name in ("dec.Wk_g", "dec.Wv_g", "dec.Wo", "dec.Wk_l"):
        ps.add(name, init_uniform(rng, (dim, dim), dim))
    return ps


def _rows(h: Tensor, idx: np.ndarray) -> Tensor:
    """h[b, idx[b]] for every row b, as (B, D)."""
    return h[np.arange(len(idx)), idx]


def tsp_decode(params: ParamSet, batch: PaddedBatch, greedy: bool = True,
               rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray, Tensor]:
    """Decode a cycle for every row.

    Returns ``orders`` (B, N) with the padding slots appended after the
    real nodes, ``lengths`` (B,) of the real cycles and the summed
    log-probabilities (B,) of the choices made (a differentiable tensor).
    """
    if not greedy and rng is None:
        raise ValueError("sampling needs an rng")
    meta = params.meta
    heads, layers, dim = meta["heads"], meta["layers"], meta["dim"]
    coords, valid = batch.coords, batch.valid
    B, N, _ = coords.shape
    H = encode_nodes(params, "enc.", coords, layers, heads, key_mask=valid)
    counts = batch.lengths.astype(np.float64)[:, None]
    h_mean = (H * valid[..., None].astype(np.float64)).sum(axis=1) / counts
    Kg = linear(H, params["dec.Wk_g"])
    Vg = linear(H, params["dec.Wv_g"])
    Kl = linear(H, params["dec.Wk_l"])
    h_first = _rows(H, np.zeros(B, dtype=np.int64))

    visited = ~valid.copy()
    visited[:, 0] = True
    last = np.zeros(B, dtype=np.int64)
    orders = [np.zeros(B, dtype=np.int64)]
    logp_total = Tensor(np.zeros(B))
    scale = 1.0 / np.sqrt(dim)
    for _ in range(N - 1):
        live = ~visited.all(axis=1)
        if not live.any():
            break
        # finished rows get a dummy choice (depot) whose log-prob is dropped
        allowed = ~visited
        allowed[~live, 0] = True
        ctx = concat([h_mean, h_first, _rows(H, last)], axis=-1)
        q = linear(ctx, params["dec.Wctx"]).reshape(B, 1, dim)
        g = linear(mha(q, Kg, Vg, heads, key_mask=allowed), params["dec.Wo"])
        logits = tanh_clip((g @ Kl.swapaxes(-1, -2)).reshape(B, N) * scale)
        logp = log_softmax(logits, axis=-1, allowed=allowed)
        if greedy:
            choice = np.argmax(np.where(allowed, logp.data, -np.inf), axis=1)
        else:
            p = np.exp(logp.data)
            u = rng.random(B)
            choice = np.minimum((np.cumsum(p, axis=1) < u[:, None]).sum(axis=1), N - 1)
            choice = np.where(allowed[np.arange(B), choice], choice,
                              np.argmax(np.where(allowed, p, -1.0), axis=1))
        picked = _rows(logp.reshape(B, N, 1), choice).reshape(B)
        logp_total = logp_total + picked * live.astype(np.float64)
        choice = np.where(live, choice, -1)
        orders.append(choice)
        rows = np.flatnonzero(live)
        visited[rows, choice[rows]] = True
        last = np.where(live, choice, last)
    order = _finish_orders(np.stack(orders, axis=1), batch.lengths, N)
    return order, cycle_lengths(coords, order), logp_total


def _finish_orders(raw: np.ndarray, lengths: np.ndarray, width: int) -> np.ndarray:
    out = np.empty((len(raw), width), dtype=np.int64)
    for b, row in enumerate(raw):
        real = [int(v) for v in row if v >= 0][:lengths[b]]
        out[b] = real + list(range(lengths[b], width))
    return out


def cycle_lengths(coords: np.ndarray, orders: np.ndarray) -> np.ndarray:
    """Closed-cycle length of each row (padding slots are depot copies: zero arcs)."""
    pts = np.take_along_axis(coords, orders[..., None], axis=1)
    nxt = np.roll(pts, -1, axis=1)
    return np.sqrt(((pts - nxt) ** 2).sum(-1)).sum(-1)


def neural_tsp_rollout(params: ParamSet, points: np.ndarray, mode: str = "greedy",
                       rng: np.random.Generator | None = None) -> tuple[list[int], float, float]:
    """Single point set: returns (order, length, log_prob)."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 1:
        return [0], 0.0, 0.0
    with no_grad():
        order, length, logp = tsp_decode(params, PaddedBatch.from_points([points]),
                                         greedy=(mode == "greedy"), rng=rng)
    return [int(v) for v in order[0]], float(length[0]), float(logp.data[0])


def unit_scale(inst: Instance) -> tuple[np.ndarray, float]:
    """Translation and scale mapping the instance into the unit square.

    Instances already inside [0,1]^2 are left untouched so the policy sees
    the training distribution unchanged.
    """
    nodes = inst.nodes
    lo, hi = nodes.min(axis=0), nodes.max(axis=0)
    if lo.min() >= 0.0 and hi.max() <= 1.0:
        return np.zeros(2), 1.0
    span = float((hi - lo).max())
    return lo, (1.0 / span if span > 0 else 1.0)


def route_tours_neural(inst: Instance, tours: Sequence[Tour], params: ParamSet) -> list[Tour]:
    """Greedy neural routing of all nonempty tours in one padded batch."""
    shift, scale = unit_scale(inst)
    out = list(tours)
    idx = [i for i, t in enumerate(tours) if len(t.visits) > 2]
    if not idx:
        return out
    batch = PaddedBatch.from_points([(tour_points(inst, tours[i]) - shift) * scale for i in idx])
    with no_grad():
        orders, _, _ = tsp_decode(params, batch, greedy=True)
    for row, i in enumerate(idx):
        t = tours[i]
        order = orders[row, 1:batch.lengths[row]]
        out[i] = Tour(t.depot_index, tuple(t.visits[o - 1] for o in order))
    return out
