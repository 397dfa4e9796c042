from typing import Dict, Iterator, Optional, Sequence

import torch
import torch.nn as nn

from moregan.exceptions import ParamError
from moregan.model.adpn import ENCODER_STRIDE, DepthPredictionNet
from moregan.model.cfpn import ContextualFeatureNet
from moregan.model.enum import ComponentSet, DepthRelation, UpsampleMode
from moregan.model.layers import SameConv4x4, check_spatial, init_weights
from moregan.model.pdnl import PyramidDepthNonLocal, PyramidPoolSpec

PATCH_STRIDE = 8


class GeneratorOutput:
    """
    Args:
        derained: [B,3,H,W] in [0,1]
        depth: [B,1,H,W] in (0,1), None for component sets without a depth network
    """

    def __init__(self, derained: torch.Tensor, depth: Optional[torch.Tensor]):
        self.derained = derained
        self.depth = depth


class Generator(nn.Module):
    """
    ADPN + CFPN + PDNL followed by Conv-ReLU-Conv and a global residual to the input.

    Args:
        components: which sub-networks are present, see ComponentSet
        trunk_channels: CFPN/PDNL width
        adpn_channels: ADPN encoder widths
        bin_sizes: pyramid bin sizes of the PDNL key sampler
        relation: depth relation variant
        upsample: how PDNL context is brought back to full resolution
        scaled_attention: scale the ADPN attention logits by 1/sqrt(C)
        identity_head: zero-initialise the last head conv so the untrained generator is the identity
        cfab_count: number of CFABs, None for the component set default
    """

    def __init__(self,
                 components: ComponentSet = ComponentSet.OURS,
                 trunk_channels: int = 64,
                 adpn_channels: Sequence[int] = (32, 64, 128, 256),
                 bin_sizes: Sequence[int] = (1, 2, 4, 8),
                 relation: DepthRelation = DepthRelation.SYMMETRIC,
                 upsample: UpsampleMode = UpsampleMode.BILINEAR,
                 scaled_attention: bool = False,
                 identity_head: bool = True,
                 cfab_count: Optional[int] = None):
        super().__init__()
        self.components = components
        # M-A is the CFAB-free baseline whatever the requested count
        if cfab_count is None or components.cfab_count == 0:
            cfab_count = components.cfab_count
        self.cfpn = ContextualFeatureNet(trunk_channels, cfab_count=cfab_count)
        self.adpn = None
        if components.depth_net:
            self.adpn = DepthPredictionNet(adpn_channels, attention=components.attention,
                                           scaled_attention=scaled_attention)
        self.pdnl = None
        if components.non_local is not None:
            self.pdnl = PyramidDepthNonLocal(trunk_channels, PyramidPoolSpec(bin_sizes),
                                             sampling=components.non_local, relation=relation,
                                             upsample=upsample)
        self.head = nn.Sequential(
            nn.Conv2d(trunk_channels, trunk_channels, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(trunk_channels, 3, kernel_size=3, padding=1),
        )
        init_weights(self.head)
        if identity_head:
            self.zero_head()

    def zero_head(self):
        last = self.head[-1]
        nn.init.zeros_(last.weight)
        nn.init.zeros_(last.bias)

    def namespaces(self) -> Dict[str, nn.Module]:
        """Sub-modules by checkpoint namespace, absent sub-networks left out."""
        res = {'cfpn': self.cfpn, 'gen': self.head}
        if self.adpn is not None:
            res['adpn'] = self.adpn
        if self.pdnl is not None:
            res['pdnl'] = self.pdnl
        return res

    def forward(self, rainy: torch.Tensor) -> GeneratorOutput:
        check_spatial(rainy, ENCODER_STRIDE, 'Generator')
        depth = self.adpn(rainy) if self.adpn is not None else None
        features = self.cfpn(rainy)
        if self.pdnl is not None:
            fused = self.pdnl(features, depth)
        elif depth is not None:
            fused = features * depth
        else:
            fused = features
        derained = torch.clamp(rainy + self.head(fused), 0.0, 1.0)
        return GeneratorOutput(derained, depth)


def generator_forward(rainy: torch.Tensor, generator: Generator) -> GeneratorOutput:
    return generator(rainy)


class Discriminator(nn.Module):
    """
    Patch discriminator: five 4x4 convolutions with strides (2,2,2,1,1), instance norm
    after layers 2-4, ReLU after layers 1-4. Returns raw logits of size H/8 x W/8.
    """

    def __init__(self, in_channels: int = 3, base_channels: int = 64):
        super().__init__()
        c = base_channels
        self.model = nn.Sequential(
            nn.Conv2d(in_channels, c, kernel_size=4, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c, c * 2, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(c * 2, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(c * 2, c * 4, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(c * 4, affine=True),
            nn.ReLU(inplace=True),
            SameConv4x4(c * 4, c * 8),
            nn.InstanceNorm2d(c * 8, affine=True),
            nn.ReLU(inplace=True),
            SameConv4x4(c * 8, 1),
        )
        init_weights(self)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        check_spatial(img, PATCH_STRIDE, 'Discriminator')
        return self.model(img)


def discriminator_forward(img: torch.Tensor, discriminator: Discriminator) -> torch.Tensor:
    return discriminator(img)


def reconstruct_rain(derained: torch.Tensor, gr_prime: Generator) -> torch.Tensor:
    """Re-rain a derained image with the independent generator; its depth output is unused."""
    return gr_prime(derained).derained


class GanTopology(nn.Module):
    """
    Three generators and two discriminators. Gs and Gr are one module, so they share
    storage; Gr' is an independent generator of the same architecture.
    """

    def __init__(self, gs: Generator, gr_prime: Generator, ds: Discriminator, dr: Discriminator):
        super().__init__()
        if gs is gr_prime:
            raise ParamError("Gr' must not share parameters with Gs")
        self.gs = gs
        self.gr_prime = gr_prime
        self.ds = ds
        self.dr = dr

    @property
    def gr(self) -> Generator:
        return self.gs

    @classmethod
    def build(cls, **generator_kwargs) -> "GanTopology":
        return cls(gs=Generator(**generator_kwargs),
                   gr_prime=Generator(**generator_kwargs),
                   ds=Discriminator(),
                   dr=Discriminator())

    def generator_parameters(self) -> Iterator[nn.Parameter]:
        yield from self.gs.parameters()
        yield from self.gr_prime.parameters()

    def discriminator_parameters(self) -> Iterator[nn.Parameter]:
        yield from self.ds.parameters()
        yield from self.dr.parameters()
