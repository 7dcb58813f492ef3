"""Residual multi-scale feature extractor placed before/after the block chain.

Layer list (a reconstruction; only the 7x7/64 head and four residual
blocks are fixed by the design):

    head   conv 7x7, C -> 64, leaky ReLU
    down   conv 3x3 stride 2, 64 -> 64, leaky ReLU
    res*4  conv 3x3 -> leaky ReLU -> conv 3x3, plus skip   (half resolution)
    up     nearest x2, conv 3x3, 64 -> 64, leaky ReLU
    fuse   concat(up, head) -> conv 1x1, 128 -> 64, leaky ReLU
    tail   conv 3x3, 64 -> C
    out    input + tail

With all-zero weights the tail is zero and the net is the identity.
"""
from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .layers import conv2d, he_normal, leaky_relu, upsample2

WIDTH = 64
RES_BLOCKS = 4


def feature_shapes(channels: int, width: int = WIDTH, res_blocks: int = RES_BLOCKS):
    s = {"head.w": (width, channels, 7, 7), "head.b": (width,),
         "down.w": (width, width, 3, 3), "down.b": (width,)}
    for r in range(res_blocks):
        for c in (1, 2):
            s[f"res{r}.conv{c}.w"] = (width, width, 3, 3)
            s[f"res{r}.conv{c}.b"] = (width,)
    s.update({"up.w": (width, width, 3, 3), "up.b": (width,),
              "fuse.w": (width, 2 * width, 1, 1), "fuse.b": (width,),
              "tail.w": (channels, width, 3, 3), "tail.b": (channels,)})
    return s


def init_features(channels: int, rng, dtype=np.float64, width: int = WIDTH,
                  res_blocks: int = RES_BLOCKS, tail_scale: float = 0.1):
    out = {}
    for name, shape in feature_shapes(channels, width, res_blocks).items():
        if name.endswith(".b"):
            out[name] = np.zeros(shape, dtype=dtype)
        else:
            out[name] = he_normal(rng, shape, dtype, tail_scale if name == "tail.w" else 1.0)
    return out


def zero_features(channels: int, dtype=np.float64, width: int = WIDTH, res_blocks: int = RES_BLOCKS):
    return {n: np.zeros(s, dtype=dtype) for n, s in feature_shapes(channels, width, res_blocks).items()}


def feature_extract(img, weights: dict, direction: str = "forward"):
    """Apply one extractor.  ``weights`` is either a single weight dict or a
    mapping ``{"forward": ..., "reverse": ...}`` from which ``direction`` picks."""
    if direction not in ("forward", "reverse"):
        raise ValidationError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    if "forward" in weights or "reverse" in weights:
        if direction not in weights:
            raise ValidationError(f"no {direction} feature weights supplied")
        weights = weights[direction]
    img = np.asarray(img)
    if img.ndim != 3:
        raise ValidationError("expected a C x H x W tensor")
    if weights["head.w"].shape[1] != img.shape[0] or weights["tail.w"].shape[0] != img.shape[0]:
        raise ValidationError(
            f"feature weights expect {weights['head.w'].shape[1]} channels, image has {img.shape[0]}")
    w = {k: v.astype(img.dtype, copy=False) for k, v in weights.items()}
    head = leaky_relu(conv2d(img, w["head.w"], w["head.b"]))
    h = leaky_relu(conv2d(head, w["down.w"], w["down.b"], stride=2))
    r = 0
    while f"res{r}.conv1.w" in w:
        y = leaky_relu(conv2d(h, w[f"res{r}.conv1.w"], w[f"res{r}.conv1.b"]))
        h = h + conv2d(y, w[f"res{r}.conv2.w"], w[f"res{r}.conv2.b"])
        r += 1
    up = leaky_relu(conv2d(upsample2(h, img.shape[1:]), w["up.w"], w["up.b"]))
    fused = leaky_relu(conv2d(np.concatenate([up, head]), w["fuse.w"], w["fuse.b"]))
    return img + conv2d(fused, w["tail.w"], w["tail.b"])
