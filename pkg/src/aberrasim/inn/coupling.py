"""Conditional affine coupling: forward transform, exact inverse, log-determinant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .condition import BITS, ConditionCode
from .subnet import SubnetSpec, init_subnet, run_subnet, zero_subnet

ALPHA = 2.0
NETS = ("psi", "phi", "rho", "eta")


@dataclass(frozen=True)
class CouplingParams:
    """Weights of the four coupling sub-networks.

    ``psi`` sees the second half plus the condition planes and produces the
    log-scale of the first half; ``phi`` its shift.  ``rho``/``eta`` do the
    same for the second half from the updated first half.
    """

    psi: dict
    phi: dict
    rho: dict
    eta: dict

    @staticmethod
    def specs(channels: int, **subnet_kw) -> dict[str, SubnetSpec]:
        if channels % 2:
            raise ValidationError(f"coupling needs an even channel count, got {channels}")
        c1 = c2 = channels // 2
        return {
            "psi": SubnetSpec(c2 + BITS, c1, **subnet_kw),
            "phi": SubnetSpec(c2, c1, **subnet_kw),
            "rho": SubnetSpec(c1, c2, **subnet_kw),
            "eta": SubnetSpec(c1, c2, **subnet_kw),
        }

    @classmethod
    def random(cls, channels: int, rng, dtype=np.float64, **subnet_kw) -> "CouplingParams":
        specs = cls.specs(channels, **subnet_kw)
        return cls(**{k: init_subnet(specs[k], rng, dtype) for k in NETS})

    @classmethod
    def zeros(cls, channels: int, dtype=np.float64, **subnet_kw) -> "CouplingParams":
        specs = cls.specs(channels, **subnet_kw)
        return cls(**{k: zero_subnet(specs[k], dtype) for k in NETS})

    def tensors(self):
        for k in NETS:
            for name, arr in getattr(self, k).items():
                yield f"{k}.{name}", arr


def _split(u):
    if u.ndim != 3:
        raise ValidationError("expected a C x H x W tensor")
    if u.shape[0] % 2:
        raise ValidationError(f"coupling needs an even channel count, got {u.shape[0]}")
    c = u.shape[0] // 2
    return u[:c], u[c:]


def _psi(params, u2, h: ConditionCode):
    x = np.concatenate([u2, h.planes(u2.shape[1], u2.shape[2], u2.dtype)])
    raw = run_subnet(params.psi, x)
    return (ALPHA * np.tanh(raw)).astype(u2.dtype, copy=False)


def coupling_forward(u, h: ConditionCode, params: CouplingParams, return_logdet: bool = False):
    u1, u2 = _split(u)
    s1 = _psi(params, u2, h)
    v1 = u1 * np.exp(s1) + run_subnet(params.phi, u2)
    s2 = run_subnet(params.rho, v1)
    v2 = u2 * np.exp(s2) + run_subnet(params.eta, v1)
    out = np.concatenate([v1, v2])
    if return_logdet:
        return out, float(s1.sum(dtype=np.float64) + s2.sum(dtype=np.float64))
    return out


def coupling_inverse(v, h: ConditionCode, params: CouplingParams):
    v1, v2 = _split(v)
    u2 = (v2 - run_subnet(params.eta, v1)) * np.exp(-run_subnet(params.rho, v1))
    u1 = (v1 - run_subnet(params.phi, u2)) * np.exp(-_psi(params, u2, h))
    return np.concatenate([u1, u2])
