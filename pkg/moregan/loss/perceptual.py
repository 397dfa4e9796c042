from abc import ABC, abstractmethod
from typing import Dict, Sequence, Tuple

import torch
import torch.nn as nn

from moregan import debug
from moregan.exceptions import ParamError

# pooling layer indices inside torchvision's vgg16().features
VGG16_POOL_INDEX = {'pool1': 4, 'pool2': 9, 'pool3': 16, 'pool4': 23, 'pool5': 30}
DEFAULT_TAPS = ('pool2', 'pool5')
FALLBACK_SEED = 20230601
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class FeatureExtractor(ABC):

    @property
    @abstractmethod
    def taps(self) -> Tuple[str, ...]:
        """Names of the tap points extract() returns, in order."""
        pass

    @abstractmethod
    def extract(self, img: torch.Tensor) -> Dict[str, torch.Tensor]:
        """Run the differentiable feature maps and return the tapped activations.

        Args:
            img: [B,3,H,W] image in [0,1]

        Returns:
            tap name to feature map
        """
        pass


class IdentityExtractor(FeatureExtractor):
    """Every tap is the image itself; with one tap the perceptual loss is the image MSE."""

    def __init__(self, taps: Sequence[str] = ('image',)):
        self._taps = tuple(taps)

    @property
    def taps(self) -> Tuple[str, ...]:
        return self._taps

    def extract(self, img: torch.Tensor) -> Dict[str, torch.Tensor]:
        return {t: img for t in self._taps}


class Vgg16Extractor(nn.Module, FeatureExtractor):
    """
    Frozen VGG-16 conv stack tapped after its pooling layers.

    Args:
        taps: pooling layers to tap, default ('pool2', 'pool5')
        pretrained: load ImageNet weights through torchvision; when they can not be
            loaded a fixed-seed random initialisation is used instead
    """

    def __init__(self, taps: Sequence[str] = DEFAULT_TAPS, pretrained: bool = False,
                 seed: int = FALLBACK_SEED):
        super().__init__()
        for t in taps:
            if t not in VGG16_POOL_INDEX:
                raise ParamError('unknown VGG-16 tap {}, expected one of {}'.format(t, sorted(VGG16_POOL_INDEX)))
        self._taps = tuple(taps)
        last = max(VGG16_POOL_INDEX[t] for t in self._taps)
        features, self.pretrained = _vgg16_features(pretrained, seed)
        self.features = features[:last + 1]
        self.register_buffer('mean', torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer('std', torch.tensor(IMAGENET_STD).view(1, 3, 1, 1))
        self.requires_grad_(False)
        self.eval()

    @property
    def taps(self) -> Tuple[str, ...]:
        return self._taps

    def train(self, mode: bool = True):
        # always frozen
        return super().train(False)

    def extract(self, img: torch.Tensor) -> Dict[str, torch.Tensor]:
        # every pooling layer halves the map
        need = 2 ** max(int(t[-1]) for t in self._taps)
        if min(img.shape[-2:]) < need:
            raise ParamError('VGG-16 taps {} need H,W >= {}, got {}x{}'.format(
                self._taps, need, img.shape[-2], img.shape[-1]))
        wanted = {VGG16_POOL_INDEX[t]: t for t in self._taps}
        x = (img - self.mean.to(img.dtype)) / self.std.to(img.dtype)
        res = {}
        for i, layer in enumerate(self.features):
            x = layer(x)
            if i in wanted:
                res[wanted[i]] = x
        return res


def _vgg16_features(pretrained: bool, seed: int) -> Tuple[nn.Sequential, bool]:
    from torchvision.models import vgg16

    if pretrained:
        try:
            from torchvision.models import VGG16_Weights
            return vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features, True
        except Exception as e:
            debug.Warning('pretrained VGG-16 weights unavailable (%s), using seed %d', e, seed)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return vgg16(weights=None).features, False
