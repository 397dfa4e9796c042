import math
from typing import Sequence

import torch
import torch.nn as nn

from moregan.exceptions import ParamError
from moregan.model.layers import check_channels, check_spatial, init_weights

ENCODER_STRIDE = 16


def self_attention(f_d: torch.Tensor,
                   w_q: torch.Tensor,
                   w_k: torch.Tensor,
                   w_v: torch.Tensor,
                   scaled: bool = False,
                   return_weights: bool = False):
    """
    Token self-attention with a residual add: out_i = sum_j softmax_j(q_i . k_j) v_j + f_i.

    Args:
        f_d: [B,C,H,W] features, flattened to H*W tokens of dim C
        w_q, w_k, w_v: [C, C_attn] projection matrices, C_attn must equal C for w_v
        scaled: divide the logits by sqrt(C_attn)
        return_weights: also return the [B,N,N] attention weights

    Returns:
        [B,C,H,W] tensor (and the weights if asked)
    """
    if f_d.dim() != 4:
        raise ParamError('self_attention expects [B,C,H,W], got {} dims'.format(f_d.dim()))
    b, c, h, w = f_d.shape
    for name, m in (('w_q', w_q), ('w_k', w_k), ('w_v', w_v)):
        if m.dim() != 2 or m.shape[0] != c:
            raise ParamError('{} must be [{}, C_attn], got {}'.format(name, c, tuple(m.shape)))
    if w_v.shape[1] != c:
        raise ParamError('value projection gives {} channels but features have {}'.format(w_v.shape[1], c))
    if w_q.shape[1] != w_k.shape[1]:
        raise ParamError('query/key widths differ: {} vs {}'.format(w_q.shape[1], w_k.shape[1]))

    tokens = f_d.flatten(2).transpose(1, 2)
    q = tokens @ w_q
    k = tokens @ w_k
    v = tokens @ w_v
    logits = q @ k.transpose(1, 2)
    if scaled:
        logits = logits / math.sqrt(q.shape[-1])
    weights = torch.softmax(logits, dim=-1)
    out = (weights @ v + tokens).transpose(1, 2).reshape(b, c, h, w)
    if return_weights:
        return out, weights
    return out


class SelfAttention(nn.Module):
    """Bottleneck self-attention block with learned W_Q, W_K, W_V."""

    def __init__(self, channels: int, scaled: bool = False):
        super().__init__()
        self.channels = channels
        self.scaled = scaled
        self.query = nn.Linear(channels, channels, bias=False)
        self.key = nn.Linear(channels, channels, bias=False)
        self.value = nn.Linear(channels, channels, bias=False)

    def forward(self, x: torch.Tensor, return_weights: bool = False):
        check_channels(x, self.channels, 'SelfAttention')
        return self_attention(x, self.query.weight.t(), self.key.weight.t(), self.value.weight.t(),
                              scaled=self.scaled, return_weights=return_weights)


def _down(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class _Up(nn.Module):

    def __init__(self, in_ch: int, out_ch: int, skip_ch: int):
        super().__init__()
        self.up = nn.Sequential(
            nn.ConvTranspose2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )
        self.merge = nn.Sequential(
            nn.Conv2d(out_ch + skip_ch, out_ch, kernel_size=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        return self.merge(torch.cat([self.up(x), skip], dim=1))


class DepthPredictionNet(nn.Module):
    """
    Attentional depth prediction network.

    Four stride-2 encoder stages, a self-attention bottleneck, four upsampling decoder
    stages that concatenate the matching encoder features, then a 1x1 conv and a sigmoid.

    Args:
        channels: encoder widths, default (32, 64, 128, 256)
        attention: use the bottleneck self-attention block; False gives the plain DPN
        scaled_attention: divide attention logits by sqrt(C)
    """

    def __init__(self,
                 channels: Sequence[int] = (32, 64, 128, 256),
                 attention: bool = True,
                 scaled_attention: bool = False,
                 in_channels: int = 3):
        super().__init__()
        if len(channels) != 4:
            raise ParamError('ADPN needs 4 encoder widths, got {}'.format(len(channels)))
        self.channels = tuple(channels)
        self.in_channels = in_channels
        c1, c2, c3, c4 = self.channels
        self.encoder = nn.ModuleList([
            _down(in_channels, c1), _down(c1, c2), _down(c2, c3), _down(c3, c4),
        ])
        self.attention = SelfAttention(c4, scaled=scaled_attention) if attention else None
        self.decoder = nn.ModuleList([
            _Up(c4, c3, c3),
            _Up(c3, c2, c2),
            _Up(c2, c1, c1),
            _Up(c1, c1, in_channels),
        ])
        self.head = nn.Conv2d(c1, 1, kernel_size=1)
        init_weights(self)

    def forward(self, rainy: torch.Tensor) -> torch.Tensor:
        check_spatial(rainy, ENCODER_STRIDE, 'DepthPredictionNet')
        check_channels(rainy, self.in_channels, 'DepthPredictionNet')
        skips = [rainy]
        x = rainy
        for stage in self.encoder:
            x = stage(x)
            skips.append(x)
        if self.attention is not None:
            x = self.attention(x)
        # skips[-1] is the bottleneck itself
        for stage, skip in zip(self.decoder, reversed(skips[:-1])):
            x = stage(x, skip)
        return torch.sigmoid(self.head(x))


def predict_depth(rainy: torch.Tensor, net: DepthPredictionNet) -> torch.Tensor:
    """[B,3,H,W] rainy image to a [B,1,H,W] depth map in (0,1)."""
    return net(rainy)
