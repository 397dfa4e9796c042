from typing import Tuple

import numpy as np

from moregan.exceptions import DegenerateInputError, ParamError
from moregan.rainsim.recipe import RainRecipe

INVERT_FLOOR = 1e-3


def check_image(img: np.ndarray, name: str = 'image', channels: int = 3):
    """Validate the [H,W,C] pixel container contract."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != channels:
        raise ParamError('{} must be [H,W,{}], got shape {}'.format(name, channels, img.shape))
    h, w = img.shape[:2]
    if h < 16 or w < 16 or h % 8 or w % 8:
        raise ParamError('{} spatial dims must be >= 16 and divisible by 8, got {}x{}'.format(name, h, w))
    if not np.all(np.isfinite(img)):
        raise ParamError('{} has non-finite entries'.format(name))


def _check_same_hw(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape[:2] != b.shape[:2]:
        raise ParamError('shape mismatch in {}: {} vs {}'.format(what, a.shape, b.shape))


def make_streak_pattern(h: int, w: int, count: int, angle_deg: float, length_px: int,
                        width_px: int, intensity: float, seed: int) -> np.ndarray:
    """
    Rasterize `count` anti-aliased line segments at uniformly random centres.

    Overlapping streaks are combined by elementwise max, so every pixel stays in [0, intensity].

    Returns:
        float64 array [h, w, 1]
    """
    if not 0.0 < intensity <= 1.0:
        raise ParamError('intensity must be in (0,1], got {}'.format(intensity))
    if count < 0:
        raise ParamError('count must be >= 0, got {}'.format(count))
    if length_px < 1 or length_px > max(h, w):
        raise ParamError('length_px {} exceeds image size {}x{}'.format(length_px, h, w))
    if width_px < 1 or width_px > min(h, w):
        raise ParamError('width_px {} exceeds image size {}x{}'.format(width_px, h, w))

    pattern = np.zeros((h, w), dtype=np.float64)
    if count == 0:
        return pattern[..., None]

    rng = np.random.default_rng(seed)
    # centres on integer pixel positions so the centre pixel reaches full coverage
    rows = rng.integers(0, h, size=count)
    cols = rng.integers(0, w, size=count)
    theta = np.deg2rad(angle_deg)
    # unit direction in (row, col); 90 degrees is a vertical streak
    dr, dc = np.sin(theta), np.cos(theta)
    half_len = (length_px - 1) / 2.0
    half_width = width_px / 2.0

    reach = int(np.ceil(half_len + half_width + 1))
    for r0, c0 in zip(rows, cols):
        r_lo, r_hi = max(0, r0 - reach), min(h, r0 + reach + 1)
        c_lo, c_hi = max(0, c0 - reach), min(w, c0 + reach + 1)
        yy, xx = np.mgrid[r_lo:r_hi, c_lo:c_hi]
        py, px = yy - r0, xx - c0
        along = np.clip(py * dr + px * dc, -half_len, half_len)
        dist = np.hypot(py - along * dr, px - along * dc)
        coverage = np.clip(half_width + 0.5 - dist, 0.0, 1.0) * intensity
        np.maximum(pattern[r_lo:r_hi, c_lo:c_hi], coverage, out=pattern[r_lo:r_hi, c_lo:c_hi])
    return pattern[..., None]


def streak_layer(recipe: RainRecipe, depth: np.ndarray) -> np.ndarray:
    """S = pattern * exp(-alpha * max(d1, d))"""
    depth = np.asarray(depth, dtype=np.float64)
    pattern = recipe.streak_pattern
    if pattern.shape != depth.shape:
        raise ParamError('shape mismatch in streak_layer: pattern {} vs depth {}'.format(
            pattern.shape, depth.shape))
    return pattern * np.exp(-recipe.alpha * np.maximum(recipe.d1, depth))


def haze_layer(beta: float, depth: np.ndarray) -> np.ndarray:
    """A = 1 - exp(-beta * d), kept strictly below 1."""
    if beta < 0:
        raise ParamError('beta must be >= 0, got {}'.format(beta))
    depth = np.asarray(depth, dtype=np.float64)
    a = -np.expm1(-beta * depth)
    return np.minimum(a, np.nextafter(1.0, 0.0))


def _composite(clean: np.ndarray, s: np.ndarray, a: np.ndarray, atm_light: float) -> np.ndarray:
    clean = np.asarray(clean, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    _check_same_hw(clean, s, 'compose')
    _check_same_hw(clean, a, 'compose')
    return clean * (1.0 - s - a) + s + atm_light * a


def compose(clean: np.ndarray, s: np.ndarray, a: np.ndarray, atm_light: float) -> np.ndarray:
    """I = B(1 - S - A) + S + atm_light * A, clamped to [0,1]."""
    return np.clip(_composite(clean, s, a, atm_light), 0.0, 1.0)


def compose_with_mask(clean: np.ndarray, s: np.ndarray, a: np.ndarray,
                      atm_light: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Same as compose, plus a [H,W] mask of pixels where any channel was clamped.
    """
    raw = _composite(clean, s, a, atm_light)
    clamped = np.any((raw < 0.0) | (raw > 1.0), axis=2)
    return np.clip(raw, 0.0, 1.0), clamped


def invert(rainy: np.ndarray, s: np.ndarray, a: np.ndarray, atm_light: float) -> np.ndarray:
    """
    Analytic inverse of compose: B = (I - S - atm_light*A) / (1 - S - A), clamped to [0,1].

    Raises:
        DegenerateInputError: 1 - S - A falls below INVERT_FLOOR at some pixel
    """
    rainy = np.asarray(rainy, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    _check_same_hw(rainy, s, 'invert')
    _check_same_hw(rainy, a, 'invert')
    denom = 1.0 - s - a
    bad = denom[..., 0] < INVERT_FLOOR
    if np.any(bad):
        pixels = [(int(r), int(c)) for r, c in zip(*np.nonzero(bad))]
        raise DegenerateInputError(pixels, INVERT_FLOOR)
    return np.clip((rainy - s - atm_light * a) / denom, 0.0, 1.0)


def degrade(clean: np.ndarray, depth: np.ndarray, recipe: RainRecipe):
    """
    Apply one recipe to a clean image.

    Returns:
        (rainy, streak, haze, clamped_mask)
    """
    s = streak_layer(recipe, depth)
    a = haze_layer(recipe.beta, depth)
    rainy, clamped = compose_with_mask(clean, s, a, recipe.atm_light)
    return rainy, s, a, clamped
