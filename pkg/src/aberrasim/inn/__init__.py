"""Invertible network building blocks and loss kernels (inference only)."""
from .condition import ConditionCode, decode_condition, encode_condition
from .coupling import ALPHA, CouplingParams, coupling_forward, coupling_inverse
from .features import feature_extract, init_features, zero_features
from .losses import (LAMBDAS, UnsupportedOperation, laplacian, loss_edge, loss_forward,
                     loss_perceptual, loss_reverse, loss_total)
from .model import ConditionalINN, InvBlock, inn_forward, inn_inverse
from .ops import ChannelMix, mix_channels, squeeze, unmix_channels, unsqueeze
from .subnet import SubnetSpec, init_subnet, run_subnet, zero_subnet
from .weights import parse_weights, read_weights, weights_bytes, write_weights

__all__ = [n for n in dir() if not n.startswith("_")]
