import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

from moregan import debug
from moregan.exceptions import DatasetIOError, ParamError
from moregan.rainsim.physics import check_image, degrade
from moregan.rainsim.recipe import RecipeSpace
from moregan.toolkit import imageio
from moregan.toolkit.hashing import Hash, hash_function_from_name

CONSTANT_DEPTH = 0.5
MANIFEST_NAME = 'manifest.json'
HASH_FUNCTION = 'mmh3_hex'


def sample_seed(seed: int, index: int) -> int:
    """Per-sample seed, independent of how samples are scheduled."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _pair_depth(clean_paths: List[str], depth_dir: Optional[str]) -> List[Optional[str]]:
    if depth_dir is None:
        return [None] * len(clean_paths)
    by_stem = {os.path.splitext(os.path.basename(p))[0]: p for p in imageio.list_images(depth_dir)}
    paired = []
    for p in clean_paths:
        stem = os.path.splitext(os.path.basename(p))[0]
        if stem not in by_stem:
            raise DatasetIOError(os.path.join(depth_dir, stem + '.png'), 'depth map not found')
        paired.append(by_stem[stem])
    return paired


def _load_pair(clean_path: str, depth_path: Optional[str]):
    clean = imageio.read_rgb(clean_path)
    check_image(clean, name=clean_path)
    if depth_path is None:
        depth = np.full(clean.shape[:2] + (1,), CONSTANT_DEPTH)
    else:
        depth = imageio.read_depth(depth_path)
        if depth.shape[:2] != clean.shape[:2]:
            raise ParamError('depth {} is {}x{} but image {} is {}x{}'.format(
                depth_path, depth.shape[0], depth.shape[1], clean_path, clean.shape[0], clean.shape[1]))
    return clean, depth


class _SampleWriter:

    def __init__(self, clean_paths, depth_paths, recipe_space: RecipeSpace, out_dir: str, seed: int):
        self.clean_paths = clean_paths
        self.depth_paths = depth_paths
        self.recipe_space = recipe_space
        self.out_dir = out_dir
        self.seed = seed

    def __call__(self, index: int) -> Dict:
        src = index % len(self.clean_paths)
        clean, depth = _load_pair(self.clean_paths[src], self.depth_paths[src])
        h, w = clean.shape[:2]
        seed = sample_seed(self.seed, index)
        recipe = self.recipe_space.sample(h, w, seed)
        rainy, _, _, clamped = degrade(clean, depth, recipe)

        name = '{:05d}.png'.format(index)
        paths = {
            'rainy': os.path.join('rainy', name),
            'clean': os.path.join('clean', name),
            'depth': os.path.join('depth', name),
        }
        imageio.write_rgb(os.path.join(self.out_dir, paths['rainy']), rainy)
        imageio.write_rgb(os.path.join(self.out_dir, paths['clean']), clean)
        imageio.write_depth(os.path.join(self.out_dir, paths['depth']), depth)
        debug.Debug('sample %d from %s, %d clamped pixels', index, self.clean_paths[src], int(clamped.sum()))
        return {
            'index': index,
            'paths': paths,
            'source': os.path.basename(self.clean_paths[src]),
            'recipe': vars(recipe),
            'seed': seed,
            'clamped_pixel_count': int(clamped.sum()),
            'hash_function': HASH_FUNCTION,
            'rainy_hash': Hash.file_hex(os.path.join(self.out_dir, paths['rainy'])),
        }


def synthesize_dataset(clean_dir: str,
                       depth_dir: Optional[str],
                       recipe_space: RecipeSpace,
                       n: int,
                       out_dir: str,
                       seed: int,
                       workers: int = 1) -> List[Dict]:
    """Synthesize n paired (rainy, clean, depth) samples.

    Sample i degrades clean image i mod len(clean_dir) with a recipe drawn from
    recipe_space under a seed derived from (seed, i), so the output does not depend on
    the number of workers.

    Args:
        clean_dir (str): directory of clean images.
        depth_dir (str): directory of 16-bit depth PNGs with the same file stems, or None
            to use a constant depth of 0.5 for every sample.
        recipe_space (RecipeSpace): distribution the recipes are drawn from.
        n (int): number of samples.
        out_dir (str): dataset root, receives rainy/, clean/, depth/ and manifest.json.
        seed (int): base seed.
        workers (int): threads used to render samples.

    Returns:
        List[Dict]: the manifest records, ordered by index.
    """
    if n < 0:
        raise ParamError('n must be >= 0, got {}'.format(n))
    clean_paths = imageio.list_images(clean_dir)
    if not clean_paths:
        raise DatasetIOError(clean_dir, 'no clean images found')
    depth_paths = _pair_depth(clean_paths, depth_dir)

    os.makedirs(out_dir, exist_ok=True)
    manifest: List[Dict] = []
    if n > 0:
        for sub in ('rainy', 'clean', 'depth'):
            os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
        writer = _SampleWriter(clean_paths, depth_paths, recipe_space, out_dir, seed)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                manifest = list(tqdm(pool.map(writer, range(n)), total=n, desc='synth'))
        else:
            manifest = [writer(i) for i in tqdm(range(n), desc='synth')]

    write_manifest(out_dir, manifest)
    debug.Info('synthesized %d samples into %s', n, out_dir)
    return manifest


def write_manifest(root: str, manifest: List[Dict]):
    path = os.path.join(root, MANIFEST_NAME)
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(json.dumps(manifest, ensure_ascii=False, indent=2))
    except OSError as e:
        raise DatasetIOError(path, str(e))


def read_manifest(root: str) -> List[Dict]:
    path = os.path.join(root, MANIFEST_NAME)
    try:
        with open(path, 'r', encoding='utf-8') as fp:
            return json.load(fp)
    except (OSError, ValueError) as e:
        raise DatasetIOError(path, str(e))


def verify_manifest(root: str) -> List[int]:
    """Indices of records whose rainy image no longer matches its recorded hash."""
    stale = []
    for record in read_manifest(root):
        hash_function = hash_function_from_name(record.get('hash_function', HASH_FUNCTION))
        path = os.path.join(root, record['paths']['rainy'])
        try:
            with open(path, 'rb') as f:
                digest = hash_function(f.read())
        except OSError as e:
            raise DatasetIOError(path, str(e))
        if digest != record.get('rainy_hash'):
            stale.append(record['index'])
    return stale
