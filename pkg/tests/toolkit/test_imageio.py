import os
import tempfile
import unittest

import numpy as np
import torch

from moregan.exceptions import DatasetIOError, ParamError
from moregan.toolkit import imageio


class TestImageIO(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_rgb_round_trip_on_grid(self):
        img = np.random.default_rng(0).integers(0, 256, (16, 24, 3)) / 255.0
        imageio.write_rgb(self._path('a.png'), img)
        np.testing.assert_array_equal(imageio.read_rgb(self._path('a.png')), img)

    def test_depth_precision(self):
        depth = np.linspace(0.0, 1.0, 256).reshape(16, 16, 1)
        imageio.write_depth(self._path('d.png'), depth)
        back = imageio.read_depth(self._path('d.png'))
        self.assertEqual(back.shape, (16, 16, 1))
        self.assertLess(np.abs(back - np.maximum(depth, imageio.DEPTH_FLOOR)).max(), 1.0 / 65535)
        self.assertEqual(back.min(), imageio.DEPTH_FLOOR)

    def test_errors(self):
        with self.assertRaises(DatasetIOError):
            imageio.read_rgb(self._path('missing.png'))
        with open(self._path('bad.png'), 'wb') as f:
            f.write(b'nope')
        with self.assertRaises(DatasetIOError):
            imageio.read_rgb(self._path('bad.png'))
        with self.assertRaises(ParamError):
            imageio.write_rgb(self._path('x.png'), np.zeros((4, 4)))

    def test_list_images(self):
        for name in ('b.png', 'a.jpg', 'notes.txt'):
            open(self._path(name), 'wb').close()
        self.assertEqual([os.path.basename(p) for p in imageio.list_images(self.tmp.name)], ['a.jpg', 'b.png'])
        self.assertEqual(imageio.list_images(self._path('missing')), [])

    def test_cached_is_read_only(self):
        imageio.write_rgb(self._path('c.png'), np.zeros((8, 8, 3)))
        arr = imageio.load_rgb_cached(self._path('c.png'))
        self.assertIs(arr, imageio.load_rgb_cached(self._path('c.png')))
        self.assertFalse(arr.flags.writeable)

    def test_tensor_conversion(self):
        img = np.random.default_rng(1).uniform(0, 1, (4, 6, 3))
        t = imageio.to_tensor(img)
        self.assertEqual(tuple(t.shape), (1, 3, 4, 6))
        self.assertEqual(t.dtype, torch.float32)
        np.testing.assert_allclose(imageio.to_image(t), img, atol=1e-7)


if __name__ == '__main__':
    unittest.main()
