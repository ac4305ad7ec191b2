"""Named parameter collections and the checkpoint file format.

Checkpoint layout (all integers little-endian)::

    b"MDVRPCKPT"              9-byte magic
    uint32 version            currently 1
    uint64 header_len
    header_len bytes          UTF-8 JSON: {"meta": {...},
                              "tensors": [{"name", "shape"}, ...]}
    float64 payload           tensors concatenated in header order, row-major

The JSON header is written with sorted keys and no timestamps, so saving
the same parameters twice gives identical bytes.
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import Iterator

import numpy as np

from .autograd import Tensor

MAGIC = b"MDVRPCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


class ParamSet:
    """Ordered mapping name -> trainable :class:`Tensor`, plus a small meta dict."""

    def __init__(self, tensors: dict[str, np.ndarray] | None = None, meta: dict | None = None):
        self._t: dict[str, Tensor] = {}
        self.meta: dict = dict(meta or {})
        for name, arr in (tensors or {}).items():
            self.add(name, arr)

    def add(self, name: str, arr) -> Tensor:
        arr = np.array(arr, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {name} has non-finite values")
        t = Tensor(arr, requires_grad=True)
        self._t[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._t[name]

    def __contains__(self, name: str) -> bool:
        return name in self._t

    def __iter__(self) -> Iterator[str]:
        return iter(self._t)

    def __len__(self) -> int:
        return len(self._t)

    def items(self):
        return self._t.items()

    def names(self) -> list[str]:
        return list(self._t)

    def tensors(self) -> list[Tensor]:
        return list(self._t.values())

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self._t.items()}

    def zero_grad(self) -> None:
        for t in self._t.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for k, t in self._t.items()}

    def copy(self) -> "ParamSet":
        return ParamSet(self.arrays(), self.meta)

    def load_from(self, other: "ParamSet") -> None:
        if other.names() != self.names():
            raise ValueError("parameter names differ")
        for k, t in self._t.items():
            t.data = other[k].data.copy()

    def equal(self, other: "ParamSet") -> bool:
        return (self.names() == other.names()
                and all(np.array_equal(self[k].data, other[k].data) for k in self))

    def subset(self, prefix: str) -> "ParamSet":
        """Parameters whose name starts with ``prefix``, prefix stripped (copies)."""
        out = ParamSet(meta=self.meta.get(prefix.rstrip("/"), {}))
        for k, t in self._t.items():
            if k.startswith(prefix):
                out.add(k[len(prefix):], t.data)
        return out

    def n_values(self) -> int:
        return int(sum(t.data.size for t in self._t.values()))


def merge(named: dict[str, ParamSet]) -> ParamSet:
    """Combine several ParamSets under ``prefix/`` names (meta nested by prefix)."""
    out = ParamSet(meta={p: ps.meta for p, ps in named.items()})
    for prefix, ps in named.items():
        for k, t in ps.items():
            out.add(f"{prefix}/{k}", t.data)
    return out


def init_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def to_bytes(params: ParamSet) -> bytes:
    header = {
        "meta": params.meta,
        "tensors": [{"name": k, "shape": list(t.shape)} for k, t in params.items()],
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQ", VERSION, len(hbytes)))
    buf.write(hbytes)
    for t in params.tensors():
        buf.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return buf.getvalue()


def from_bytes(blob: bytes) -> ParamSet:
    if not blob.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<IQ", blob, off)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off += struct.calcsize("<IQ")
    header = json.loads(blob[off:off + hlen].decode("utf-8"))
    off += hlen
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if off + nbytes > len(blob):
            raise CheckpointError(f"truncated payload for {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(blob, dtype="<f8", count=count,
                                               offset=off).reshape(shape)
        off += nbytes
    if off != len(blob):
        raise CheckpointError("trailing bytes after payload")
    return ParamSet(tensors, header.get("meta", {}))


def save(params: ParamSet, path) -> None:
    Path(path).write_bytes(to_bytes(params))


def load(path) -> ParamSet:
    return from_bytes(Path(path).read_bytes())
