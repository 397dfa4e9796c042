import math
import os
from typing import Iterator, List, Optional, Tuple

import numpy as np
import torch

from moregan import debug
from moregan.exceptions import ConfigError
from moregan.rainsim.dataset import CONSTANT_DEPTH
from moregan.toolkit import imageio

# independent random streams derived from the run seed
STREAM_PAIRED = 0
STREAM_UNPAIRED = 1
STREAM_FAKE_LABEL = 2
STREAM_CROP = 3


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


class PairedDataset:
    """
    Synthetic pairs laid out as root/rainy, root/clean and optionally root/depth, matched
    by file stem. Without a depth directory every depth map is the constant 0.5.
    """

    def __init__(self, root: str):
        self.root = root
        self.rainy_paths = imageio.list_images(os.path.join(root, 'rainy'))
        if not self.rainy_paths:
            raise ConfigError('no rainy images under {}'.format(os.path.join(root, 'rainy')))
        clean = {_stem(p): p for p in imageio.list_images(os.path.join(root, 'clean'))}
        depth_dir = os.path.join(root, 'depth')
        depth = {_stem(p): p for p in imageio.list_images(depth_dir)} if os.path.isdir(depth_dir) else None
        self.clean_paths: List[str] = []
        self.depth_paths: List[Optional[str]] = []
        for p in self.rainy_paths:
            stem = _stem(p)
            if stem not in clean:
                raise ConfigError('rainy image {} has no clean partner'.format(p))
            self.clean_paths.append(clean[stem])
            if depth is None:
                self.depth_paths.append(None)
            elif stem in depth:
                self.depth_paths.append(depth[stem])
            else:
                raise ConfigError('rainy image {} has no depth map in {}'.format(p, depth_dir))
        if depth is None:
            debug.Info('no depth directory under %s, using constant depth %.1f', root, CONSTANT_DEPTH)

    def __len__(self):
        return len(self.rainy_paths)

    def load(self, index: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full-size (rainy, clean, depth) arrays of one sample."""
        rainy = imageio.load_rgb_cached(self.rainy_paths[index])
        clean = imageio.load_rgb_cached(self.clean_paths[index])
        if rainy.shape != clean.shape:
            raise ConfigError('{} is {} but {} is {}'.format(
                self.rainy_paths[index], rainy.shape, self.clean_paths[index], clean.shape))
        if self.depth_paths[index] is None:
            depth = np.full(rainy.shape[:2] + (1,), CONSTANT_DEPTH)
        else:
            depth = imageio.load_depth_cached(self.depth_paths[index])
            if depth.shape[:2] != rainy.shape[:2]:
                raise ConfigError('{} does not match the size of {}'.format(
                    self.depth_paths[index], self.rainy_paths[index]))
        return rainy, clean, depth

    def partner_of(self, path: str) -> Optional[int]:
        """Index of the pair whose rainy image has the same file name, if any."""
        name = os.path.basename(path)
        for i, p in enumerate(self.rainy_paths):
            if os.path.basename(p) == name:
                return i
        return None


class UnpairedDataset:
    """A flat directory of real rainy images; a paired root contributes its rainy/ subdirectory."""

    def __init__(self, root: str):
        self.root = root
        directory = os.path.join(root, 'rainy') if os.path.isdir(os.path.join(root, 'rainy')) else root
        self.paths = imageio.list_images(directory)
        if not self.paths:
            raise ConfigError('no images under {}'.format(directory))

    def __len__(self):
        return len(self.paths)

    def load(self, index: int) -> np.ndarray:
        return imageio.load_rgb_cached(self.paths[index])


def load_paired(root: str) -> PairedDataset:
    return PairedDataset(root)


def load_unpaired(root: str) -> UnpairedDataset:
    return UnpairedDataset(root)


class CyclicSampler:
    """
    Batches of indices from a fresh permutation every epoch. An epoch is ceil(n / batch)
    batches; the last batch of an epoch wraps around to the start of its permutation.
    """

    def __init__(self, n: int, batch: int, rng: np.random.Generator):
        if n < 1 or batch < 1:
            raise ConfigError('cannot sample batches of {} from {} items'.format(batch, n))
        self.n = n
        self.batch = batch
        self.rng = rng
        self.epoch = 0

    @property
    def epoch_length(self) -> int:
        return math.ceil(self.n / self.batch)

    def __iter__(self) -> Iterator[List[int]]:
        while True:
            perm = self.rng.permutation(self.n)
            for b in range(self.epoch_length):
                yield [int(perm[(b * self.batch + k) % self.n]) for k in range(self.batch)]
            self.epoch += 1


class FakeLabelSampler:
    """
    Clean images of the paired pool drawn uniformly without replacement per epoch,
    skipping the clean partner of the rainy image they are matched with.
    """

    def __init__(self, pool_size: int, rng: np.random.Generator):
        if pool_size < 1:
            raise ConfigError('fake label pool is empty')
        self.pool_size = pool_size
        self.rng = rng
        self._queue: List[int] = []

    def _refill(self):
        self._queue.extend(int(i) for i in self.rng.permutation(self.pool_size))

    def draw(self, partner: Optional[int] = None) -> int:
        if partner is not None and self.pool_size < 2:
            raise ConfigError('fake label pool of one image can not avoid its own pair')
        if not self._queue:
            self._refill()
        for pos, idx in enumerate(self._queue):
            if idx != partner:
                return self._queue.pop(pos)
        # only the partner is left in this epoch
        self._refill()
        return self.draw(partner)


class SupervisedBatch:
    def __init__(self, x_r: torch.Tensor, x_g: torch.Tensor, d_g: torch.Tensor, indices: List[int]):
        self.x_r = x_r
        self.x_g = x_g
        self.d_g = d_g
        self.indices = indices

    def to(self, device) -> "SupervisedBatch":
        return SupervisedBatch(self.x_r.to(device), self.x_g.to(device), self.d_g.to(device), self.indices)


class UnsupervisedBatch:
    def __init__(self, y_r: torch.Tensor, y_g: torch.Tensor, indices: List[int], label_indices: List[int]):
        self.y_r = y_r
        self.y_g = y_g
        self.indices = indices
        self.label_indices = label_indices

    def to(self, device) -> "UnsupervisedBatch":
        return UnsupervisedBatch(self.y_r.to(device), self.y_g.to(device), self.indices, self.label_indices)


def _crop_origin(shape, patch_h: int, patch_w: int, rng: np.random.Generator, path: str) -> Tuple[int, int]:
    h, w = shape[:2]
    if h < patch_h or w < patch_w:
        raise ConfigError('{} is {}x{}, smaller than the {}x{} patch'.format(path, h, w, patch_h, patch_w))
    return int(rng.integers(0, h - patch_h + 1)), int(rng.integers(0, w - patch_w + 1))


def _stack(arrays: List[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack([a.transpose(2, 0, 1) for a in arrays])).float()


class BatchStream:
    """
    Deterministic batch source for both branches. Index order, crops and fake labels each
    come from their own random stream of the run seed.

    Args:
        paired: synthetic pairs
        unpaired: real rainy images, None for supervised-only training
        batch: images per batch
        patch_h, patch_w: crop size
        seed: run seed
    """

    def __init__(self, paired: PairedDataset, unpaired: Optional[UnpairedDataset],
                 batch: int, patch_h: int, patch_w: int, seed: int):
        self.paired = paired
        self.unpaired = unpaired
        self.patch_h = patch_h
        self.patch_w = patch_w
        self._crop_rng = stream_rng(seed, STREAM_CROP)
        self._paired_iter = iter(CyclicSampler(len(paired), batch, stream_rng(seed, STREAM_PAIRED)))
        self._unpaired_iter = None
        self._labels = None
        if unpaired is not None:
            self._unpaired_iter = iter(CyclicSampler(len(unpaired), batch, stream_rng(seed, STREAM_UNPAIRED)))
            self._labels = FakeLabelSampler(len(paired), stream_rng(seed, STREAM_FAKE_LABEL))
            self._partners = [paired.partner_of(p) for p in unpaired.paths]

    def _crop(self, arrays, path: str):
        r, c = _crop_origin(arrays[0].shape, self.patch_h, self.patch_w, self._crop_rng, path)
        return [a[r:r + self.patch_h, c:c + self.patch_w] for a in arrays]

    def next_supervised(self) -> SupervisedBatch:
        indices = next(self._paired_iter)
        xr, xg, dg = [], [], []
        for i in indices:
            rainy, clean, depth = self._crop(self.paired.load(i), self.paired.rainy_paths[i])
            xr.append(rainy)
            xg.append(clean)
            dg.append(depth)
        return SupervisedBatch(_stack(xr), _stack(xg), _stack(dg), indices)

    def next_unsupervised(self) -> UnsupervisedBatch:
        if self._unpaired_iter is None:
            raise ConfigError('unsupervised batch requested without an unpaired dataset')
        indices = next(self._unpaired_iter)
        yr, yg, labels = [], [], []
        for i in indices:
            (rainy,) = self._crop([self.unpaired.load(i)], self.unpaired.paths[i])
            j = self._labels.draw(self._partners[i])
            (clean,) = self._crop([self.paired.load(j)[1]], self.paired.clean_paths[j])
            yr.append(rainy)
            yg.append(clean)
            labels.append(j)
        return UnsupervisedBatch(_stack(yr), _stack(yg), indices, labels)
