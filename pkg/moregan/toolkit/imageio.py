import os
from typing import List

import numpy as np
import torch
from cachetools import cached, LRUCache
from PIL import Image as PILImage, UnidentifiedImageError

from moregan.exceptions import DatasetIOError, ParamError

DEPTH_FLOOR = 1e-4
IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg', '.bmp')


def list_images(directory: str) -> List[str]:
    """Sorted image file paths of a flat directory."""
    if not os.path.isdir(directory):
        return []
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(IMAGE_EXTENSIONS))
    return [os.path.join(directory, n) for n in names]


def read_rgb(path: str) -> np.ndarray:
    """Read an 8-bit image as float64 [H,W,3] in [0,1] (value v maps to v/255)."""
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im.convert('RGB'), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetIOError(path, str(e))
    return arr.astype(np.float64) / 255.0


def write_rgb(path: str, img: np.ndarray):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ParamError('expected [H,W,3] image, got shape {}'.format(img.shape))
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        PILImage.fromarray(data).save(path, format='PNG')
    except OSError as e:
        raise DatasetIOError(path, str(e))


def read_depth(path: str) -> np.ndarray:
    """Read a 16-bit grayscale depth PNG as float64 [H,W,1], v maps to max(v/65535, floor)."""
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im)
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetIOError(path, str(e))
    if arr.ndim == 3:
        arr = arr[..., 0]
    depth = arr.astype(np.float64) / 65535.0
    return np.maximum(depth, DEPTH_FLOOR)[..., None]


def write_depth(path: str, depth: np.ndarray):
    depth = np.asarray(depth)
    if depth.ndim == 3:
        depth = depth[..., 0]
    data = np.round(np.clip(depth, 0.0, 1.0) * 65535.0).astype(np.uint16)
    try:
        PILImage.fromarray(data).save(path, format='PNG')
    except OSError as e:
        raise DatasetIOError(path, str(e))


@cached(cache=LRUCache(maxsize=256))
def load_rgb_cached(path: str) -> np.ndarray:
    arr = read_rgb(path)
    arr.flags.writeable = False
    return arr


@cached(cache=LRUCache(maxsize=256))
def load_depth_cached(path: str) -> np.ndarray:
    arr = read_depth(path)
    arr.flags.writeable = False
    return arr


def to_tensor(img: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """[H,W,C] array to a [1,C,H,W] tensor."""
    arr = np.ascontiguousarray(np.asarray(img).transpose(2, 0, 1))
    return torch.from_numpy(arr.copy()).to(dtype).unsqueeze(0)


def to_image(t: torch.Tensor) -> np.ndarray:
    """[1,C,H,W] or [C,H,W] tensor to an [H,W,C] float64 array."""
    t = t.detach().cpu()
    if t.dim() == 4:
        t = t[0]
    return t.permute(1, 2, 0).to(torch.float64).numpy()
