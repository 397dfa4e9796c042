import math
from typing import Union

import numpy as np
import torch
from cachetools import cached, LRUCache
from scipy.signal import convolve2d

from moregan.exceptions import ParamError
from moregan.toolkit.imageio import to_image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA = (0.299, 0.587, 0.114)

ImageLike = Union[np.ndarray, torch.Tensor]


def _as_array(img: ImageLike) -> np.ndarray:
    if isinstance(img, torch.Tensor):
        return to_image(img)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    return arr


def _check_pair(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise ParamError('{}: shape mismatch {} vs {}'.format(what, a.shape, b.shape))


def psnr(a: ImageLike, b: ImageLike) -> float:
    """
    Peak signal-to-noise ratio in dB for images in [0,1].

    Returns:
        10*log10(1/MSE), math.inf for identical images (see is_identical)
    """
    a, b = _as_array(a), _as_array(b)
    _check_pair(a, b, 'psnr')
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def is_identical(psnr_db: float) -> bool:
    return math.isinf(psnr_db)


@cached(cache=LRUCache(maxsize=8))
def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = (size - 1) / 2.0
    y, x = np.ogrid[-r:r + 1, -r:r + 1]
    g = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    g = g / g.sum()
    g.flags.writeable = False
    return g


def _filter(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    return convolve2d(x, np.rot90(window, 2), mode='valid')


def ssim_map(a: np.ndarray, b: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Single-channel SSIM map over every fully covered window position."""
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu1 = _filter(a, window)
    mu2 = _filter(b, window)
    mu1_sq = mu1 * mu1
    mu2_sq = mu2 * mu2
    mu1_mu2 = mu1 * mu2
    sigma1_sq = _filter(a * a, window) - mu1_sq
    sigma2_sq = _filter(b * b, window) - mu2_sq
    sigma12 = _filter(a * b, window) - mu1_mu2
    return ((2 * mu1_mu2 + c1) * (2 * sigma12 + c2)) / ((mu1_sq + mu2_sq + c1) * (sigma1_sq + sigma2_sq + c2))


def ssim(a: ImageLike, b: ImageLike, luminance: bool = False) -> float:
    """
    Structural similarity with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03 on
    dynamic range 1, averaged over channels and window positions.

    Args:
        a, b: [H,W,C] arrays or [1,C,H,W] tensors in [0,1]
        luminance: compare the luma channel only instead of averaging RGB
    """
    a, b = _as_array(a), _as_array(b)
    _check_pair(a, b, 'ssim')
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ParamError('ssim needs images of at least {0}x{0}, got {1}x{2}'.format(
            SSIM_WINDOW, a.shape[0], a.shape[1]))
    if luminance:
        if a.shape[2] != 3:
            raise ParamError('luminance ssim needs RGB images, got {} channels'.format(a.shape[2]))
        a = (a @ np.asarray(LUMA))[..., None]
        b = (b @ np.asarray(LUMA))[..., None]
    window = gaussian_window()
    values = [float(np.mean(ssim_map(a[..., c], b[..., c], window))) for c in range(a.shape[2])]
    return float(np.mean(values))
