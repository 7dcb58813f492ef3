"""7-bit binary condition code for the defocus distance."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

BITS = 7
D_MIN, D_MAX, D_STEP = -125.0, 125.0, 2.5
N_LEVELS = 101


@dataclass(frozen=True)
class ConditionCode:
    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != BITS or any(b not in (0, 1) for b in self.bits):
            raise ValidationError(f"condition code must be {BITS} binary digits")

    @property
    def index(self) -> int:
        return int("".join(map(str, self.bits)), 2)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    def planes(self, height: int, width: int, dtype=np.float64) -> np.ndarray:
        """The code broadcast to 7 constant H x W planes."""
        return np.broadcast_to(np.asarray(self.bits, dtype=dtype)[:, None, None],
                               (BITS, height, width))


def encode_condition(d: float) -> ConditionCode:
    """Index round((d + 125) / 2.5) in [0, 100] as a big-endian 7-bit code.

    Off-lattice distances snap to the nearest lattice point with a warning.
    """
    d = float(d)
    if not D_MIN <= d <= D_MAX:
        raise ValidationError(f"distance {d} mm outside [{D_MIN}, {D_MAX}]")
    x = (d - D_MIN) / D_STEP
    index = int(np.floor(x + 0.5))
    if abs(x - index) > 1e-9:
        warnings.warn(f"distance {d} mm is off the {D_STEP} mm lattice; "
                      f"snapped to {D_MIN + index * D_STEP}", stacklevel=2)
    return ConditionCode(tuple(int(c) for c in format(index, f"0{BITS}b")))


def decode_condition(code: ConditionCode) -> float:
    return D_MIN + D_STEP * code.index
