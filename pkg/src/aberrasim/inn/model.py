"""Conditional invertible network: feature extractors around k invertible blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .condition import ConditionCode, encode_condition
from .coupling import CouplingParams, coupling_forward, coupling_inverse
from .features import feature_extract, init_features, zero_features
from .ops import ChannelMix, squeeze, unsqueeze

DEFAULT_K = 12


@dataclass(frozen=True)
class InvBlock:
    """squeeze -> 1x1 mix -> conditional coupling -> unsqueeze."""

    mix: ChannelMix
    coupling: CouplingParams

    def forward(self, t, h: ConditionCode):
        z = self.mix.forward(squeeze(t))
        return unsqueeze(coupling_forward(z, h, self.coupling))

    def inverse(self, t, h: ConditionCode):
        z = coupling_inverse(squeeze(t), h, self.coupling)
        return unsqueeze(self.mix.inverse(z))


def _code(d) -> ConditionCode:
    return d if isinstance(d, ConditionCode) else encode_condition(d)


@dataclass(frozen=True)
class ConditionalINN:
    blocks: tuple[InvBlock, ...]
    features_forward: dict
    features_reverse: dict
    channels: int = 3
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @classmethod
    def random(cls, channels: int = 3, k: int = DEFAULT_K, seed: int = 0, dtype=np.float32,
               identity_features: bool = False, **subnet_kw) -> "ConditionalINN":
        """Seeded construction: orthogonal mixes, He-normal subnets and extractors."""
        ss = np.random.SeedSequence(seed)
        block_seeds, fwd_seed, rev_seed = ss.spawn(3)
        blocks = []
        for s in block_seeds.spawn(k):
            rng = np.random.default_rng(s)
            mix = ChannelMix.random_orthogonal(4 * channels, rng, dtype)
            blocks.append(InvBlock(mix, CouplingParams.random(4 * channels, rng, dtype, **subnet_kw)))
        if identity_features:
            ff, fr = zero_features(channels, dtype), zero_features(channels, dtype)
        else:
            ff = init_features(channels, np.random.default_rng(fwd_seed), dtype)
            fr = init_features(channels, np.random.default_rng(rev_seed), dtype)
        meta = {"seed": int(seed), "subnet": dict(subnet_kw), "identity_features": identity_features}
        return cls(tuple(blocks), ff, fr, channels, meta)

    def _check(self, t):
        t = np.asarray(t)
        if t.ndim != 3 or t.shape[0] != self.channels:
            raise ValidationError(f"expected a {self.channels} x H x W tensor, got {t.shape}")
        if self.k and (t.shape[1] % 2 or t.shape[2] % 2):
            raise ValidationError("image height and width must be even")
        return t

    def chain_forward(self, t, d):
        h = _code(d)
        t = self._check(t)
        for b in self.blocks:
            t = b.forward(t, h)
        return t

    def chain_inverse(self, t, d):
        h = _code(d)
        t = self._check(t)
        for b in reversed(self.blocks):
            t = b.inverse(t, h)
        return t

    def forward(self, Y, d):
        """Degraded image -> restored estimate.  Not invertible as a whole."""
        return self.chain_forward(feature_extract(self._check(Y), self.features_forward), d)

    def inverse(self, X, d):
        """Sharp image -> degraded estimate via the inverse chain and reverse extractor."""
        return feature_extract(self.chain_inverse(X, d), self.features_reverse, "reverse")


def inn_forward(model: ConditionalINN, Y, d):
    return model.forward(Y, d)


def inn_inverse(model: ConditionalINN, X, d):
    return model.inverse(X, d)
