"""CINN weight container.

Layout: b"CINN", u16 version, u32 header length, UTF-8 JSON header, then
float32 little-endian tensors in the order listed by the header.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .coupling import CouplingParams, NETS
from .model import ConditionalINN, InvBlock
from .ops import ChannelMix

MAGIC = b"CINN"
VERSION = 1
_PRE = struct.Struct("<4sHI")


def _tensors(model: ConditionalINN):
    for i, b in enumerate(model.blocks):
        yield f"block{i}.mix", b.mix.W
        for name, arr in b.coupling.tensors():
            yield f"block{i}.{name}", arr
    for name, arr in model.features_forward.items():
        yield f"features.forward.{name}", arr
    for name, arr in model.features_reverse.items():
        yield f"features.reverse.{name}", arr


def weights_bytes(model: ConditionalINN) -> bytes:
    items = list(_tensors(model))
    header = {"version": VERSION, "k": model.k, "channels": model.channels,
              "meta": model.meta,
              "tensors": [{"name": n, "shape": list(a.shape)} for n, a in items]}
    hb = json.dumps(header, sort_keys=True).encode()
    blobs = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for _, a in items)
    return _PRE.pack(MAGIC, VERSION, len(hb)) + hb + blobs


def write_weights(model: ConditionalINN, path) -> None:
    Path(path).write_bytes(weights_bytes(model))


def parse_weights(data: bytes, dtype=np.float32) -> ConditionalINN:
    if len(data) < _PRE.size:
        raise ValidationError("weight file truncated")
    magic, version, hlen = _PRE.unpack_from(data)
    if magic != MAGIC:
        raise ValidationError("not a CINN weight file")
    if version != VERSION:
        raise ValidationError(f"unsupported CINN version {version}")
    try:
        header = json.loads(data[_PRE.size:_PRE.size + hlen])
    except ValueError as exc:
        raise ValidationError(f"bad CINN header: {exc}") from exc
    off = _PRE.size + hlen
    tensors = {}
    for t in header["tensors"]:
        n = int(np.prod(t["shape"]))
        if off + 4 * n > len(data):
            raise ValidationError(f"weight file truncated at {t['name']}")
        tensors[t["name"]] = np.frombuffer(data, "<f4", n, off).reshape(t["shape"]).astype(dtype)
        off += 4 * n
    if off != len(data):
        raise ValidationError("trailing bytes after weight blobs")

    def group(prefix):
        return {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}

    blocks = []
    for i in range(header["k"]):
        nets = {net: group(f"block{i}.{net}.") for net in NETS}
        blocks.append(InvBlock(ChannelMix(tensors[f"block{i}.mix"]), CouplingParams(**nets)))
    return ConditionalINN(tuple(blocks), group("features.forward."), group("features.reverse."),
                          header["channels"], header.get("meta", {}))


def read_weights(path, dtype=np.float32) -> ConditionalINN:
    return parse_weights(Path(path).read_bytes(), dtype)
