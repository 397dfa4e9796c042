import os
from typing import Optional

import numpy as np

from moregan.loss.weights import LossWeights
from moregan.rainsim.dataset import synthesize_dataset
from moregan.rainsim.recipe import RecipeSpace
from moregan.toolkit import imageio
from moregan.trainer.config import TrainConfig


def write_clean_images(directory: str, count: int = 4, h: int = 32, w: int = 32, seed: int = 0):
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    for i in range(count):
        base = rng.uniform(0.2, 0.7, size=3)
        ramp = np.stack([xx / w, yy / h, (xx + yy) / (h + w)], axis=-1)
        imageio.write_rgb(os.path.join(directory, 'img_{}.png'.format(i)), np.clip(base + 0.25 * ramp, 0, 1))


def write_depth_maps(directory: str, count: int = 4, h: int = 32, w: int = 32):
    os.makedirs(directory, exist_ok=True)
    rows = np.linspace(0.1, 0.9, h)[:, None, None]
    for i in range(count):
        imageio.write_depth(os.path.join(directory, 'img_{}.png'.format(i)), np.broadcast_to(rows, (h, w, 1)))


def make_dataset(root: str, n: int = 4, h: int = 32, w: int = 32, with_depth: bool = True, seed: int = 1,
                 space: Optional[RecipeSpace] = None):
    """Synthesize a small paired dataset under root/data and return its path."""
    clean_dir = os.path.join(root, 'clean_src')
    write_clean_images(clean_dir, count=max(n, 1), h=h, w=w)
    depth_dir = None
    if with_depth:
        depth_dir = os.path.join(root, 'depth_src')
        write_depth_maps(depth_dir, count=max(n, 1), h=h, w=w)
    out = os.path.join(root, 'data')
    space = space or RecipeSpace(count=(5, 10), length_px=(3, 6))
    synthesize_dataset(clean_dir, depth_dir, space, n, out, seed)
    return out


def small_config(out_dir: str, **kwargs) -> TrainConfig:
    values = dict(
        batch=2, patch_h=32, patch_w=32, max_steps=2, checkpoint_every=1,
        trunk_channels=8, adpn_channels=(4, 4, 8, 8), bin_sizes=(1, 2, 4),
        out_dir=out_dir, seed=3, weights=LossWeights(),
    )
    values.update(kwargs)
    return TrainConfig(**values)
