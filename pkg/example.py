# example.py walks the quick start of moregan.
# 1. synthesize a tiny paired dataset from generated clean images
# 2. train the full model for a few steps on both branches
# 3. derain one image with the final checkpoint
# 4. evaluate the checkpoint on the dataset
import json
import os
import tempfile

import numpy as np

import moregan
from moregan.rainsim.dataset import synthesize_dataset
from moregan.rainsim.recipe import RecipeSpace
from moregan.toolkit import imageio
from moregan.toolkit.evaluation import derain_image, evaluate
from moregan.trainer.checkpoint import load_generator
from moregan.trainer.data import load_paired, load_unpaired
from moregan.trainer.semi import train

# disable/enable per-sample and per-step log print
moregan.debug.DebugEnable = False


def make_clean_images(directory: str, count: int = 4, h: int = 64, w: int = 128):
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(0)
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    for i in range(count):
        base = rng.uniform(0.2, 0.8, size=3)
        img = np.clip(base + 0.2 * np.stack([xx, yy, xx * yy], axis=-1), 0, 1)
        imageio.write_rgb(os.path.join(directory, 'clean_{}.png'.format(i)), img)


def main():
    work = tempfile.mkdtemp(prefix='moregan_')
    clean_dir = os.path.join(work, 'clean_src')
    data_dir = os.path.join(work, 'data')
    make_clean_images(clean_dir)

    synthesize_dataset(clean_dir, None, RecipeSpace(), n=8, out_dir=data_dir, seed=1)

    config = moregan.TrainConfig(max_steps=4, batch=2, checkpoint_every=2, trunk_channels=16,
                                 adpn_channels=(8, 16, 32, 64), out_dir=os.path.join(work, 'run'))
    path = train(config, load_paired(data_dir), load_unpaired(data_dir))
    print('checkpoint:', path)

    generator, _ = load_generator(path)
    rainy = imageio.read_rgb(os.path.join(data_dir, 'rainy', '00000.png'))
    derained, depth = derain_image(generator, rainy)
    imageio.write_rgb(os.path.join(work, 'derained.png'), derained)

    report = evaluate(path, data_dir, out_dir=os.path.join(work, 'reports'), grids=True)
    print(json.dumps(vars(report)['mean'], indent=2))


if __name__ == '__main__':
    main()
