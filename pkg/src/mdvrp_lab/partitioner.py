"""Learned partitioner: encoder, tour selection with local context, node selection.

Decoding is batched over instances of equal size.  Every depot owns one
tour slot (there is at most one active tour per depot), so slot order is
the environment's active-list order and ties resolve to the lower depot.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Instance, Solution, Tour, solution_cost
from .env import DEPOT, Action, EnvState, action_masks, check_progress, init_state, is_terminal
from .features import to_polar
from .instancegen import rng_for
from .nn import (CLIP, ParamSet, Tensor, concat, encode_nodes, init_encoder, init_uniform, linear,
                 log_softmax, masked_fill, mha, no_grad, tanh_clip)
from .router import RouterKind, route_solution

RouteCost = Callable[[Instance, Sequence[Tour]], float]


class DecodeMode(str, enum.Enum):
    GREEDY = "greedy"
    SAMPLE = "sample"


@dataclass(frozen=True)
class DecodeConfig:
    mode: DecodeMode = DecodeMode.GREEDY
    samples: int = 1
    k: int = 10
    seed: int = 0
    sample_tours: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        object.__setattr__(self, "mode", DecodeMode(self.mode))


def resolve_k(percent: float, n_customers: int) -> int:
    """Neighbourhood size from a percentage of the customer count, at least 1."""
    return max(1, math.ceil(percent * n_customers / 100.0 - 1e-9))


def init_partitioner_params(rng: np.random.Generator, dim: int = 32, layers: int = 2,
                            heads: int = 4) -> ParamSet:
    if dim % heads:
        raise ValueError("dim must be divisible by heads")
    ps = ParamSet(meta={"kind": "partitioner", "dim": dim, "layers": layers, "heads": heads})
    init_encoder(ps, "enc.", rng, 3, dim, layers)
    tour_dim = 2 * dim + 1
    ps.add("tsl.Wq1", init_uniform(rng, (dim, dim), dim))
    ps.add("tsl.Wk1", init_uniform(rng, (tour_dim, dim), tour_dim))
    ps.add("tsl.Wv1", init_uniform(rng, (tour_dim, dim), tour_dim))
    ps.add("tsl.Wq2", init_uniform(rng, (dim, dim), dim))
    ps.add("tsl.Wk2", init_uniform(rng, (tour_dim, dim), tour_dim))
    ps.add("nsl.Wq3", init_uniform(rng, (3 * dim + 1, dim), 3 * dim + 1))
    ps.add("nsl.Wk3", init_uniform(rng, (dim, dim), dim))
    ps.add("nsl.Wv2", init_uniform(rng, (dim, dim), dim))
    ps.add("nsl.Wo", init_uniform(rng, (dim, dim), dim))
    return ps


def encode(params: ParamSet, feats) -> Tensor:
    """Node embeddings, (n_nodes, D) or batched (B, n_nodes, D)."""
    m = params.meta
    return encode_nodes(params, "enc.", feats, m["layers"], m["heads"])


def candidate_set(st: EnvState, k: int) -> np.ndarray:
    """Union over active tours of the k unvisited customers nearest each tour's last node.

    Returned sorted by customer index.  Distance ties go to the lower index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    inst = st.inst
    free = np.flatnonzero(~st.visited)
    if len(free) == 0:
        return free
    picked = set()
    for tour in st.active:
        d = inst.dist[tour.last_node, inst.n_depots + free]
        picked.update(free[np.argsort(d, kind="stable")[:k]].tolist())
    return np.array(sorted(picked), dtype=np.int64)


# -- batched layer internals ----------------------------------------------------------
# ``P`` is any mapping name -> Tensor (a ParamSet, or plain dict in gradient checks).

def tour_context(H: Tensor, last_idx: np.ndarray, remaining_frac: np.ndarray, n_depots: int) -> Tensor:
    """h_phi = [h_depot, h_last, c/C] per depot slot: (L, d, 2D+1)."""
    L = H.shape[0]
    h_dep = H[:, :n_depots]
    h_last = H[np.arange(L)[:, None], last_idx]
    return concat([h_dep, h_last, Tensor(remaining_frac[..., None])], axis=-1)


def tslcgl_scores(P: Mapping[str, Tensor], q_emb: Tensor, h_phi: Tensor, tour_exists: np.ndarray,
                  zeta_valid: np.ndarray, heads: int) -> tuple[Tensor, Tensor]:
    """Local context X (L, Z, D) and clipped per-tour scores (L, d)."""
    dim = q_emb.shape[-1]
    X = mha(linear(q_emb, P["tsl.Wq1"]), linear(h_phi, P["tsl.Wk1"]),
            linear(h_phi, P["tsl.Wv1"]), heads, key_mask=tour_exists)
    s = (linear(X, P["tsl.Wq2"]) @ linear(h_phi, P["tsl.Wk2"]).swapaxes(-1, -2)) * (1.0 / np.sqrt(dim))
    s = masked_fill(s, ~zeta_valid[..., None], -1e9)
    return X, tanh_clip(s.max(axis=1))


def nsl_logits(P: Mapping[str, Tensor], E: Tensor, q_in: Tensor, node_mask: np.ndarray,
               heads: int) -> Tensor:
    """Clipped node compatibilities (L, n+1) over the fused embeddings ``E``."""
    L, slots, dim = E.shape
    q = linear(q_in, P["nsl.Wq3"]).reshape(L, 1, dim)
    mu = mha(q, linear(E, P["nsl.Wk3"]), linear(E, P["nsl.Wv2"]), heads, key_mask=node_mask)
    g = linear(mu, P["nsl.Wo"])
    return tanh_clip((g @ E.swapaxes(-1, -2)).reshape(L, slots) * (1.0 / np.sqrt(dim)))


def fuse(H: Tensor, X: Tensor, zeta: np.ndarray, zeta_valid: np.ndarray, depot: np.ndarray,
         n_depots: int) -> Tensor:
    """Slot 0: chosen tour's depot; slot 1+i: h_i + X_i if i in zeta else h_i."""
    L, N, dim = H.shape
    n = N - n_depots
    scatter = np.zeros((L, n, zeta.shape[1]))
    rows, cols = np.nonzero(zeta_valid)
    scatter[rows, zeta[rows, cols], cols] = 1.0
    cust = H[:, n_depots:] + Tensor(scatter) @ X
    return concat([H[np.arange(L), depot].reshape(L, 1, dim), cust], axis=1)


# -- decoding ---------------------------------------------------------------------------

@dataclass
class _StepInputs:
    slot_masks: np.ndarray    # (L, d, n+1)
    exists: np.ndarray        # (L, d)
    last_idx: np.ndarray      # (L, d)
    rem_frac: np.ndarray      # (L, d)
    zeta: np.ndarray          # (L, Z)
    zeta_valid: np.ndarray    # (L, Z)
    open_nodes: np.ndarray    # (L, N) depots + unvisited customers
    position: list            # per row: depot slot -> index in st.active


def _gather_inputs(states: Sequence[EnvState], k: int) -> _StepInputs:
    inst0 = states[0].inst
    d, n = inst0.n_depots, inst0.n_customers
    L = len(states)
    slot_masks = np.zeros((L, d, n + 1), dtype=bool)
    exists = np.zeros((L, d), dtype=bool)
    last_idx = np.tile(np.arange(d), (L, 1))
    rem_frac = np.zeros((L, d))
    zetas, position = [], []
    open_nodes = np.ones((L, d + n), dtype=bool)
    for r, st in enumerate(states):
        masks = action_masks(st)
        check_progress(st, masks)
        pos = {}
        for i, (tour, m) in enumerate(zip(st.active, masks)):
            s = tour.depot_index
            pos[s] = i
            slot_masks[r, s] = m
            exists[r, s] = True
            last_idx[r, s] = tour.last_node
            rem_frac[r, s] = tour.remaining / st.inst.capacity
        position.append(pos)
        zetas.append(candidate_set(st, k))
        open_nodes[r, d:] = ~st.visited
    Z = max(len(z) for z in zetas)
    zeta = np.zeros((L, Z), dtype=np.int64)
    zeta_valid = np.zeros((L, Z), dtype=bool)
    for r, z in enumerate(zetas):
        zeta[r, :len(z)] = z
        zeta_valid[r, :len(z)] = True
    return _StepInputs(slot_masks, exists, last_idx, rem_frac, zeta, zeta_valid, open_nodes, position)


def _categorical(rng: np.random.Generator, p: np.ndarray, allowed: np.ndarray) -> int:
    c = np.cumsum(np.where(allowed, p, 0.0))
    j = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    j = min(j, len(p) - 1)
    if not allowed[j]:
        j = int(np.flatnonzero(allowed)[-1])
    return j


def decode_batch(params: ParamSet, instances: Sequence[Instance], k: int, greedy: bool = True,
                 rngs: Sequence[np.random.Generator] | None = None,
                 sample_tours: bool = False) -> tuple[list[list[Tour]], Tensor]:
    """Run the policy on equally sized instances; returns partitions and summed log-probs (B,)."""
    if not instances:
        raise ValueError("empty batch")
    d, n = instances[0].n_depots, instances[0].n_customers
    if any(i.n_depots != d or i.n_customers != n for i in instances):
        raise ValueError("decode_batch needs instances of equal size")
    if not greedy and (rngs is None or len(rngs) != len(instances)):
        raise ValueError("sampling needs one rng per instance")
    heads = params.meta["heads"]
    B = len(instances)
    H_all = encode(params, np.stack([to_polar(i) for i in instances]))
    states = [init_state(i) for i in instances]
    logp_total = Tensor(np.zeros(B))
    while True:
        live = [b for b in range(B) if not is_terminal(states[b])]
        if not live:
            break
        L = len(live)
        ar = np.arange(L)
        sts = [states[b] for b in live]
        inp = _gather_inputs(sts, k)
        H = H_all[np.array(live)] if L < B else H_all
        q_emb = H[ar[:, None], d + inp.zeta]
        h_phi = tour_context(H, inp.last_idx, inp.rem_frac, d)
        X, scores = tslcgl_scores(params, q_emb, h_phi, inp.exists, inp.zeta_valid, heads)
        tour_ok = inp.slot_masks.any(axis=-1)
        step_logp = None
        if sample_tours and not greedy:
            tlogp = log_softmax(scores, axis=-1, allowed=tour_ok)
            p = np.exp(tlogp.data)
            slot = np.array([_categorical(rngs[b], p[r], tour_ok[r]) for r, b in enumerate(live)])
            step_logp = tlogp[ar, slot]
        else:
            slot = np.argmax(np.where(tour_ok, scores.data, -np.inf), axis=1)
        node_mask = inp.slot_masks[ar, slot]
        E = fuse(H, X, inp.zeta, inp.zeta_valid, slot, d)
        w = inp.open_nodes.astype(np.float64)
        h_g = (H * w[..., None]).sum(axis=1) / w.sum(axis=1, keepdims=True)
        h_dep = H[ar, slot]
        h_last = H[ar, inp.last_idx[ar, slot]]
        q_in = concat([h_g, h_dep, h_last, Tensor(inp.rem_frac[ar, slot][:, None])], axis=-1)
        logp = log_softmax(nsl_logits(params, E, q_in, node_mask, heads), axis=-1, allowed=node_mask)
        if greedy:
            node = np.argmax(np.where(node_mask, logp.data, -np.inf), axis=1)
        else:
            p = np.exp(logp.data)
            node = np.array([_categorical(rngs[b], p[r], node_mask[r]) for r, b in enumerate(live)])
        picked = logp[ar, node]
        step_logp = picked if step_logp is None else step_logp + picked
        onehot = np.zeros((B, L))
        onehot[live, ar] = 1.0
        logp_total = logp_total + (Tensor(onehot) @ step_logp.reshape(L, 1)).reshape(B)
        for r, st in enumerate(sts):
            j = int(node[r])
            st.apply(Action(inp.position[r][int(slot[r])], DEPOT if j == 0 else j - 1))
    return [st.partition() for st in states], logp_total


# -- single-instance API ---------------------------------------------------------------

def tslcgl(params: ParamSet, H: Tensor, st: EnvState, zeta: np.ndarray) -> tuple[int, Tensor, np.ndarray]:
    """Chosen active-list index, local context X (|zeta|, D) and tour logits (-inf if infeasible)."""
    d = st.inst.n_depots
    inp = _gather_inputs([st], 1)
    zeta = np.asarray(zeta, dtype=np.int64)[None]
    valid = np.ones_like(zeta, dtype=bool)
    Hb = H.reshape(1, *H.shape)
    q_emb = Hb[np.zeros((1, 1), dtype=np.int64), d + zeta]
    h_phi = tour_context(Hb, inp.last_idx, inp.rem_frac, d)
    X, scores = tslcgl_scores(params, q_emb, h_phi, inp.exists, valid, params.meta["heads"])
    tour_ok = inp.slot_masks[0].any(axis=-1)
    if not tour_ok.any():
        raise ValueError("no active tour has a feasible action")
    logits = np.where(tour_ok, scores.data[0], -np.inf)
    slot = int(np.argmax(logits))
    order = [t.depot_index for t in st.active]
    return inp.position[0][slot], X.reshape(*X.shape[1:]), np.array([logits[s] for s in order])


def nsl(params: ParamSet, H: Tensor, X: Tensor, zeta: np.ndarray, tour_index: int,
        st: EnvState) -> np.ndarray:
    """Probability vector over [depot, customer 0, ..., customer n-1]."""
    d = st.inst.n_depots
    tour = st.active[tour_index]
    node_mask = action_masks(st)[tour_index][None]
    if not node_mask.any():
        raise ValueError("all actions masked for this tour")
    zeta = np.asarray(zeta, dtype=np.int64)[None]
    Hb = H.reshape(1, *H.shape)
    E = fuse(Hb, X.reshape(1, *X.shape), zeta, np.ones_like(zeta, dtype=bool),
             np.array([tour.depot_index]), d)
    w = np.concatenate([np.ones(d), (~st.visited).astype(np.float64)])
    h_g = (Hb * w[None, :, None]).sum(axis=1) / w.sum()
    q_in = concat([h_g, Hb[[0], [tour.depot_index]], Hb[[0], [tour.last_node]],
                   Tensor(np.array([[tour.remaining / st.inst.capacity]]))], axis=-1)
    logits = nsl_logits(params, E, q_in, node_mask, params.meta["heads"])
    return np.exp(log_softmax(logits, axis=-1, allowed=node_mask).data[0])


def nn2opt_cost(inst: Instance, tours: Sequence[Tour]) -> float:
    return solution_cost(inst, route_solution(inst, tours, RouterKind.NN_2OPT))


def rollout(inst: Instance, params: ParamSet, cfg: DecodeConfig = DecodeConfig(),
            route_cost: RouteCost = nn2opt_cost) -> tuple[list[Tour], float]:
    """Greedy partition, or the cheapest of ``cfg.samples`` sampled partitions."""
    with no_grad():
        if cfg.mode is DecodeMode.GREEDY:
            parts, logp = decode_batch(params, [inst], cfg.k)
            return parts[0], float(logp.data[0])
        best = None
        chunk = 256
        for start in range(0, cfg.samples, chunk):
            idx = range(start, min(cfg.samples, start + chunk))
            rngs = [rng_for(cfg.seed, i) for i in idx]
            parts, logp = decode_batch(params, [inst] * len(rngs), cfg.k, greedy=False,
                                       rngs=rngs, sample_tours=cfg.sample_tours)
            for part, lp in zip(parts, logp.data):
                c = route_cost(inst, part)
                if best is None or c < best[0] - 1e-12:
                    best = (c, part, float(lp))
    return best[1], best[2]


def parallel_k(inst: Instance, params: ParamSet, k_list: Sequence[int],
               router: RouterKind = RouterKind.NN_2OPT, router_params=None) -> Solution:
    """Best routed GREEDY solution over several neighbourhood sizes (first wins ties)."""
    if not k_list:
        raise ValueError("k_list must be nonempty")
    best = None
    for k in k_list:
        part, _ = rollout(inst, params, DecodeConfig(k=int(k)))
        sol = route_solution(inst, part, router, router_params)
        c = solution_cost(inst, sol)
        if best is None or c < best[0] - 1e-12:
            best = (c, sol)
    return best[1]


__all__ = [
    "CLIP", "DecodeConfig", "DecodeMode", "candidate_set", "decode_batch", "encode", "fuse",
    "init_partitioner_params", "nsl", "nsl_logits", "parallel_k", "resolve_k", "rollout",
    "tour_context", "tslcgl", "tslcgl_scores",
]
