from typing import Optional

import torch
import torch.nn.functional as F

from moregan.exceptions import ParamError
from moregan.loss.perceptual import FeatureExtractor

DARK_CHANNEL_PATCH = 15


def _check_same(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise ParamError('shape mismatch in {}: {} vs {}'.format(what, tuple(a.shape), tuple(b.shape)))


def multi_task_loss(derained: torch.Tensor, clean: torch.Tensor,
                    depth: Optional[torch.Tensor] = None,
                    depth_gt: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Mean L1 over the image plus mean L1 over the depth map (skipped when depth is None)."""
    _check_same(derained, clean, 'multi_task_loss')
    loss = F.l1_loss(derained, clean)
    if depth is not None:
        if depth_gt is None:
            raise ParamError('multi_task_loss got a depth prediction without ground truth')
        _check_same(depth, depth_gt, 'multi_task_loss depth')
        loss = loss + F.l1_loss(depth, depth_gt)
    return loss


def lsgan_g_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    return torch.mean((fake_logits - 1.0) ** 2)


def lsgan_d_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    return torch.mean((real_logits - 1.0) ** 2) + torch.mean(fake_logits ** 2)


def cycle_loss(reconstructed: torch.Tensor, original: torch.Tensor) -> torch.Tensor:
    _check_same(reconstructed, original, 'cycle_loss')
    return F.l1_loss(reconstructed, original)


def dark_channel(img: torch.Tensor, patch: int = DARK_CHANNEL_PATCH) -> torch.Tensor:
    """
    Per-pixel minimum over channels, then over a patch x patch neighbourhood with
    replicated borders.

    Args:
        img: [B,C,H,W]
        patch: odd window size

    Returns:
        [B,1,H,W] dark channel
    """
    if patch < 1 or patch % 2 == 0:
        raise ParamError('dark channel patch must be odd and >= 1, got {}'.format(patch))
    min_c = torch.amin(img, dim=1, keepdim=True)
    if patch == 1:
        return min_c
    r = patch // 2
    padded = F.pad(min_c, (r, r, r, r), mode='replicate')
    return -F.max_pool2d(-padded, kernel_size=patch, stride=1)


def dc_loss(img: torch.Tensor, patch: int = DARK_CHANNEL_PATCH) -> torch.Tensor:
    return torch.mean(torch.abs(dark_channel(img, patch)))


def tv_loss(img: torch.Tensor) -> torch.Tensor:
    """Mean L1 of horizontal forward differences plus mean L1 of vertical ones."""
    h, w = img.shape[-2:]
    if h < 2 or w < 2:
        raise ParamError('tv_loss needs H,W >= 2, got {}x{}'.format(h, w))
    dx = torch.mean(torch.abs(img[..., :, 1:] - img[..., :, :-1]))
    dy = torch.mean(torch.abs(img[..., 1:, :] - img[..., :-1, :]))
    return dx + dy


def perceptual_loss(a: torch.Tensor, b: torch.Tensor, extractor: FeatureExtractor) -> torch.Tensor:
    """Sum over the extractor's tap points of the mean squared feature difference."""
    _check_same(a, b, 'perceptual_loss')
    fa = extractor.extract(a)
    fb = extractor.extract(b)
    loss = a.new_zeros(())
    for tap in extractor.taps:
        if tap not in fa or tap not in fb:
            raise ParamError('extractor did not produce tap {}'.format(tap))
        loss = loss + F.mse_loss(fa[tap], fb[tap])
    return loss
