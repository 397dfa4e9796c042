import torch
import torch.nn as nn

from moregan.exceptions import ParamError

INIT_STD = 0.02


def init_weights(module: nn.Module, std: float = INIT_STD):
    """Normal(0, std) convolution/linear weights, zero biases, unit norm scales."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)):
            if m.weight is not None:
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)


def check_spatial(x: torch.Tensor, multiple: int, what: str):
    if x.dim() != 4:
        raise ParamError('{} expects a [B,C,H,W] tensor, got {} dims'.format(what, x.dim()))
    h, w = x.shape[-2:]
    if h % multiple or w % multiple or h == 0 or w == 0:
        raise ParamError('{} needs H,W divisible by {}, got {}x{}'.format(what, multiple, h, w))


def check_channels(x: torch.Tensor, channels: int, what: str):
    if x.shape[1] != channels:
        raise ParamError('{} expects {} channels, got {}'.format(what, channels, x.shape[1]))


class SameConv4x4(nn.Sequential):
    """4x4 stride-1 convolution that keeps the spatial size, padding 1 before and 2 after."""

    def __init__(self, in_ch: int, out_ch: int, bias: bool = True):
        super().__init__(
            nn.ZeroPad2d((1, 2, 1, 2)),
            nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=1, padding=0, bias=bias),
        )

    @property
    def conv(self) -> nn.Conv2d:
        return self[1]
