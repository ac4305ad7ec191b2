"""Attention building blocks shared by the partitioner and the TSP router."""
from __future__ import annotations

import numpy as np

from .autograd import Tensor, as_tensor, softmax
from .params import ParamSet, init_uniform

CLIP = 10.0


def linear(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """Row-vector convention: ``x @ W (+ b)`` with ``W`` of shape (in, out)."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"linear: input dim {x.shape[-1]} != weight rows {W.shape[0]}")
    if x.ndim == 1:
        out = (x.reshape(1, -1) @ W).reshape(W.shape[1])
    else:
        out = x @ W
    return out if b is None else out + b


def tanh_clip(x: Tensor, A: float = CLIP) -> Tensor:
    return as_tensor(x).tanh() * A


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, n, dim = x.shape
    return x.reshape(*lead, n, heads, dim // heads).swapaxes(-2, -3)


def mha(q: Tensor, k: Tensor, v: Tensor, heads: int,
        key_mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention per head, heads concatenated.

    ``q``: (..., nq, D); ``k``/``v``: (..., nk, D).  ``key_mask`` is a
    boolean array broadcastable to (..., nk); False keys get zero weight.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    dim = q.shape[-1]
    if dim % heads:
        raise ValueError(f"embedding dim {dim} not divisible by {heads} heads")
    if k.shape[-1] != dim or v.shape[-1] != dim:
        raise ValueError("q, k, v must share the embedding dim")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError("k and v need the same number of rows")
    qh, kh, vh = (_split_heads(t, heads) for t in (q, k, v))
    compat = (qh @ kh.swapaxes(-1, -2)) * (1.0 / np.sqrt(dim // heads))
    allowed = None
    if key_mask is not None:
        allowed = np.asarray(key_mask, dtype=bool)[..., None, None, :]
    attn = softmax(compat, axis=-1, allowed=allowed)
    out = (attn @ vh).swapaxes(-2, -3)
    *lead, nq, h, dh = out.shape
    return out.reshape(*lead, nq, h * dh)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc * ((var + eps) ** -0.5) * gain + bias


# -- encoder --------------------------------------------------------------------

def init_encoder(ps: ParamSet, prefix: str, rng: np.random.Generator,
                 in_dim: int, dim: int, layers: int, ff_mult: int = 4) -> None:
    ps.add(f"{prefix}in.W", init_uniform(rng, (in_dim, dim), in_dim))
    ps.add(f"{prefix}in.b", init_uniform(rng, (dim,), in_dim))
    hidden = ff_mult * dim
    for li in range(layers):
        p = f"{prefix}L{li}."
        for w in ("Wq", "Wk", "Wv", "Wo"):
            ps.add(p + w, init_uniform(rng, (dim, dim), dim))
        ps.add(p + "n1.g", np.ones(dim))
        ps.add(p + "n1.b", np.zeros(dim))
        ps.add(p + "ff.W1", init_uniform(rng, (dim, hidden), dim))
        ps.add(p + "ff.b1", init_uniform(rng, (hidden,), dim))
        ps.add(p + "ff.W2", init_uniform(rng, (hidden, dim), hidden))
        ps.add(p + "ff.b2", init_uniform(rng, (dim,), hidden))
        ps.add(p + "n2.g", np.ones(dim))
        ps.add(p + "n2.b", np.zeros(dim))


def encoder_layer(ps: ParamSet, p: str, h: Tensor, heads: int,
                  key_mask: np.ndarray | None = None) -> Tensor:
    att = mha(linear(h, ps[p + "Wq"]), linear(h, ps[p + "Wk"]), linear(h, ps[p + "Wv"]),
              heads, key_mask)
    h = layer_norm(h + linear(att, ps[p + "Wo"]), ps[p + "n1.g"], ps[p + "n1.b"])
    ff = linear(linear(h, ps[p + "ff.W1"], ps[p + "ff.b1"]).relu(), ps[p + "ff.W2"], ps[p + "ff.b2"])
    return layer_norm(h + ff, ps[p + "n2.g"], ps[p + "n2.b"])


def encode_nodes(ps: ParamSet, prefix: str, feats, layers: int, heads: int,
                 key_mask: np.ndarray | None = None) -> Tensor:
    """Input projection followed by ``layers`` attention blocks."""
    h = linear(as_tensor(feats), ps[f"{prefix}in.W"], ps[f"{prefix}in.b"])
    for li in range(layers):
        h = encoder_layer(ps, f"{prefix}L{li}.", h, heads, key_mask)
    return h
