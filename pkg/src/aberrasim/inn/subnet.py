"""Coupling sub-networks: Conv7-32 head, residual blocks, output projection."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .layers import conv2d, he_normal, leaky_relu


@dataclass(frozen=True)
class SubnetSpec:
    in_channels: int
    out_channels: int
    hidden: int = 32
    head_kernel: int = 7
    res_blocks: int = 2
    res_kernel: int = 3
    out_kernel: int = 3
    out_scale: float = 0.02

    def shapes(self) -> dict[str, tuple[int, ...]]:
        h = self.hidden
        s = {"head.w": (h, self.in_channels, self.head_kernel, self.head_kernel), "head.b": (h,)}
        for r in range(self.res_blocks):
            for c in (1, 2):
                s[f"res{r}.conv{c}.w"] = (h, h, self.res_kernel, self.res_kernel)
                s[f"res{r}.conv{c}.b"] = (h,)
        s["out.w"] = (self.out_channels, h, self.out_kernel, self.out_kernel)
        s["out.b"] = (self.out_channels,)
        return s

    def to_dict(self) -> dict:
        return asdict(self)


def init_subnet(spec: SubnetSpec, rng, dtype=np.float64) -> dict[str, np.ndarray]:
    """Seeded He-normal weights, zero biases; the output layer is scaled by ``out_scale``."""
    params = {}
    for name, shape in spec.shapes().items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            scale = spec.out_scale if name == "out.w" else 1.0
            params[name] = he_normal(rng, shape, dtype, scale)
    return params


def zero_subnet(spec: SubnetSpec, dtype=np.float64) -> dict[str, np.ndarray]:
    return {name: np.zeros(shape, dtype=dtype) for name, shape in spec.shapes().items()}


def run_subnet(params: dict[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    h = leaky_relu(conv2d(x, params["head.w"], params["head.b"]))
    r = 0
    while f"res{r}.conv1.w" in params:
        y = leaky_relu(conv2d(h, params[f"res{r}.conv1.w"], params[f"res{r}.conv1.b"]))
        h = h + conv2d(y, params[f"res{r}.conv2.w"], params[f"res{r}.conv2.b"])
        r += 1
    return conv2d(h, params["out.w"], params["out.b"])
