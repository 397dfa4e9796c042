from typing import Sequence

import torch
import torch.nn as nn

from moregan.exceptions import ParamError
from moregan.model.layers import SameConv4x4, check_channels, check_spatial, init_weights

DILATIONS = (1, 3, 5)


class DilatedBranch(nn.Sequential):
    """Three stacked 3x3 convolutions with dilations (1, 3, 5), each followed by a ReLU."""

    def __init__(self, channels: int, dilations: Sequence[int] = DILATIONS):
        layers = []
        for d in dilations:
            layers.append(nn.Conv2d(channels, channels, kernel_size=3, dilation=d, padding=d))
            layers.append(nn.ReLU(inplace=True))
        super().__init__(*layers)
        self.dilations = tuple(dilations)

    @property
    def receptive_field(self) -> int:
        return 1 + 2 * sum(self.dilations)


class ContextualFeatureAggregationBlock(nn.Module):
    """
    CFAB: Cout_1 = branch_1(F_c), Cout_k = branch_k(F_c + Cout_{k-1}),
    out = exit(F_c + fuse(concat(Cout_1, Cout_2, Cout_3))), with F_c = entry(x).
    Every convolution keeps the spatial size.
    """

    def __init__(self, channels: int = 64, dilations: Sequence[int] = DILATIONS, branches: int = 3):
        super().__init__()
        self.channels = channels
        self.entry = SameConv4x4(channels, channels)
        self.branches = nn.ModuleList([DilatedBranch(channels, dilations) for _ in range(branches)])
        self.fuse = nn.Conv2d(channels * branches, channels, kernel_size=1)
        self.exit = SameConv4x4(channels, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, 'ContextualFeatureAggregationBlock')
        f_c = self.entry(x)
        outs = []
        prev = None
        for branch in self.branches:
            prev = branch(f_c if prev is None else f_c + prev)
            outs.append(prev)
        return self.exit(f_c + self.fuse(torch.cat(outs, dim=1)))


def cfab_forward(f_c: torch.Tensor, block: ContextualFeatureAggregationBlock) -> torch.Tensor:
    return block(f_c)


class ContextualFeatureNet(nn.Module):
    """
    Contextual feature prediction network: a stem convolution lifting the image to
    `channels`, then `cfab_count` CFABs at full resolution.

    With cfab_count=0 it is the plain baseline of four convolutions and three ReLUs.
    """

    def __init__(self, channels: int = 64, cfab_count: int = 4, in_channels: int = 3):
        super().__init__()
        if cfab_count < 0:
            raise ParamError('cfab_count must be >= 0, got {}'.format(cfab_count))
        self.channels = channels
        self.cfab_count = cfab_count
        self.in_channels = in_channels
        if cfab_count == 0:
            self.body = nn.Sequential(
                nn.Conv2d(in_channels, channels, kernel_size=3, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv2d(channels, channels, kernel_size=3, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv2d(channels, channels, kernel_size=3, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv2d(channels, channels, kernel_size=3, padding=1),
            )
        else:
            self.body = nn.Sequential(
                nn.Conv2d(in_channels, channels, kernel_size=3, padding=1),
                nn.ReLU(inplace=True),
                *[ContextualFeatureAggregationBlock(channels) for _ in range(cfab_count)],
            )
        init_weights(self)

    def forward(self, rainy: torch.Tensor) -> torch.Tensor:
        check_spatial(rainy, 8, 'ContextualFeatureNet')
        check_channels(rainy, self.in_channels, 'ContextualFeatureNet')
        return self.body(rainy)


def cfpn_forward(rainy: torch.Tensor, net: ContextualFeatureNet) -> torch.Tensor:
    """[B,3,H,W] rainy image to [B,C,H,W] contextual features."""
    return net(rainy)
