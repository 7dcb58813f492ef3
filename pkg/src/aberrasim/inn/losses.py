"""Training-loss kernels (evaluation only)."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from scipy.ndimage import correlate

from ..errors import AberrasimError, ValidationError

LAMBDAS = (1.0, 0.5, 0.05, 0.02)
LAPLACIAN = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)


class UnsupportedOperation(AberrasimError, NotImplementedError):
    """Raised when the perceptual loss is requested without a feature extractor."""


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def loss_forward(X_hat, X) -> float:
    a, b = _pair(X_hat, X)
    return float(np.mean(np.abs(a - b)))


loss_reverse = loss_forward


def laplacian(t):
    """Laplacian stencil on each channel of a (C,) H x W array, reflect padding."""
    t = np.asarray(t, dtype=np.float64)
    k = LAPLACIAN if t.ndim == 2 else LAPLACIAN[None]
    return correlate(t, k, mode="mirror")


def loss_edge(X_hat, X) -> float:
    a, b = _pair(X_hat, X)
    return float(np.mean(np.abs(laplacian(a - b))))


def loss_perceptual(X_hat, X, extractor: Optional[Callable] = None) -> float:
    """Mean absolute feature difference, i.e. the L1 norm divided by C_m*H_m*W_m."""
    if extractor is None:
        raise UnsupportedOperation("perceptual loss needs a feature extractor")
    a, b = _pair(X_hat, X)
    fa, fb = _pair(extractor(a), extractor(b))
    return float(np.abs(fa - fb).sum() / fa.size)


def loss_total(forward: float, reverse: float, edge: float,
               perceptual: Optional[float] = None, lambdas=LAMBDAS) -> float:
    l1, l2, l3, l4 = lambdas
    total = l1 * forward + l2 * reverse + l3 * edge
    if perceptual is None:
        if l4 != 0:
            raise UnsupportedOperation(
                "no perceptual term supplied; pass perceptual=... or set its weight to 0")
        return float(total)
    return float(total + l4 * perceptual)
