import json
import os
from typing import Dict, Iterable, List, Optional, Tuple

from moregan.exceptions import ConfigError, DatasetIOError, ParamError
from moregan.loss.perceptual import DEFAULT_TAPS, VGG16_POOL_INDEX
from moregan.loss.weights import LossWeights
from moregan.model.adpn import ENCODER_STRIDE
from moregan.model.enum import ComponentSet, DepthRelation, LossVariant, UpsampleMode

PATCH_MULTIPLE = 16
_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


class TrainConfig:
    """
    Every knob of a training run.

    Args:
        lr_gen: learning rate of the generator side (Gs/Gr and Gr')
        lr_disc: learning rate of the discriminators
        momentum1: first Adam moment decay
        momentum2: second Adam moment decay
        weight_decay: Adam weight decay
        batch: images per step
        patch_h: crop height, a multiple of 16
        patch_w: crop width, a multiple of 16
        weights: loss weights, masked by loss_variant
        branch_ratio: (supervised, unsupervised) steps per schedule window
        max_steps: optimisation steps
        seed: seeds torch, numpy and the data order
        components: generator component set
        loss_variant: loss ablation variant
        depth_relation: depth relation variant of the non-local stage
        scaled_attention: scale ADPN attention logits by 1/sqrt(C)
        checkpoint_every: steps between checkpoints
        out_dir: receives checkpoints and the train log
        dark_channel_patch: odd window of the dark channel prior
        perceptual_pretrained: load ImageNet VGG-16 weights for the perceptual loss
        perceptual_taps: VGG-16 pooling layers compared by the perceptual loss
        identity_head: zero-initialise the generator heads
        upsample: how non-local context is upsampled
        cfab_count: CFABs in the contextual network
        trunk_channels: width of the contextual network
        adpn_channels: encoder widths of the depth network
        bin_sizes: pyramid bins of the non-local key sampler
        ssim_luminance: compute SSIM on luminance instead of averaging RGB channels
        device: torch device string
    """

    def __init__(self,
                 lr_gen: float = 5e-4,
                 lr_disc: float = 1e-5,
                 momentum1: float = 0.9,
                 momentum2: float = 0.999,
                 weight_decay: float = 0.0,
                 batch: int = 4,
                 patch_h: int = 64,
                 patch_w: int = 128,
                 weights: Optional[LossWeights] = None,
                 branch_ratio: Tuple[int, int] = (1, 1),
                 max_steps: int = 2000,
                 seed: int = 0,
                 components: ComponentSet = ComponentSet.OURS,
                 loss_variant: LossVariant = LossVariant.V7,
                 depth_relation: DepthRelation = DepthRelation.SYMMETRIC,
                 scaled_attention: bool = False,
                 checkpoint_every: int = 500,
                 out_dir: str = 'runs',
                 dark_channel_patch: int = 15,
                 perceptual_pretrained: bool = False,
                 perceptual_taps: Tuple[str, ...] = DEFAULT_TAPS,
                 identity_head: bool = True,
                 upsample: UpsampleMode = UpsampleMode.BILINEAR,
                 cfab_count: int = 4,
                 trunk_channels: int = 64,
                 adpn_channels: Tuple[int, ...] = (32, 64, 128, 256),
                 bin_sizes: Tuple[int, ...] = (1, 2, 4, 8),
                 ssim_luminance: bool = False,
                 device: str = 'cpu'):
        self.lr_gen = lr_gen
        self.lr_disc = lr_disc
        self.momentum1 = momentum1
        self.momentum2 = momentum2
        self.weight_decay = weight_decay
        self.batch = batch
        self.patch_h = patch_h
        self.patch_w = patch_w
        self.weights = weights if weights is not None else LossWeights()
        self.branch_ratio = tuple(branch_ratio)
        self.max_steps = max_steps
        self.seed = seed
        self.components = components
        self.loss_variant = loss_variant
        self.depth_relation = depth_relation
        self.scaled_attention = scaled_attention
        self.checkpoint_every = checkpoint_every
        self.out_dir = out_dir
        self.dark_channel_patch = dark_channel_patch
        self.perceptual_pretrained = perceptual_pretrained
        self.perceptual_taps = tuple(perceptual_taps)
        self.identity_head = identity_head
        self.upsample = upsample
        self.cfab_count = cfab_count
        self.trunk_channels = trunk_channels
        self.adpn_channels = tuple(adpn_channels)
        self.bin_sizes = tuple(bin_sizes)
        self.ssim_luminance = ssim_luminance
        self.device = device
        self.validate()

    def validate(self):
        if self.lr_gen <= 0 or self.lr_disc <= 0:
            raise ConfigError('learning rates must be > 0, got lr_gen={} lr_disc={}'.format(
                self.lr_gen, self.lr_disc))
        if not (0 <= self.momentum1 < 1 and 0 <= self.momentum2 < 1):
            raise ConfigError('momentums must be in [0,1), got {} and {}'.format(self.momentum1, self.momentum2))
        if self.weight_decay < 0:
            raise ConfigError('weight_decay must be >= 0, got {}'.format(self.weight_decay))
        if self.batch < 1:
            raise ConfigError('batch must be >= 1, got {}'.format(self.batch))
        for name in ('patch_h', 'patch_w'):
            v = getattr(self, name)
            if v < PATCH_MULTIPLE or v % PATCH_MULTIPLE:
                raise ConfigError('{} must be a positive multiple of {}, got {}'.format(name, PATCH_MULTIPLE, v))
        if isinstance(self.components, ComponentSet) and self.components.depth_net:
            bottleneck = self.batch * (self.patch_h // ENCODER_STRIDE) * (self.patch_w // ENCODER_STRIDE)
            if bottleneck <= 1:
                raise ConfigError(
                    'batch {} with {}x{} patches leaves a single value per channel at the depth network '
                    'bottleneck, batch norm cannot train on it; raise batch or the patch size'.format(
                        self.batch, self.patch_h, self.patch_w))
        if len(self.branch_ratio) != 2 or min(self.branch_ratio) < 0 or sum(self.branch_ratio) < 1:
            raise ConfigError('branch_ratio must be a:b with a,b >= 0 and a+b >= 1, got {}'.format(
                self.branch_ratio))
        if self.max_steps < 0:
            raise ConfigError('max_steps must be >= 0, got {}'.format(self.max_steps))
        if self.checkpoint_every < 1:
            raise ConfigError('checkpoint_every must be >= 1, got {}'.format(self.checkpoint_every))
        if self.dark_channel_patch < 1 or self.dark_channel_patch % 2 == 0:
            raise ConfigError('dark_channel_patch must be odd and >= 1, got {}'.format(self.dark_channel_patch))
        if self.cfab_count < 0 or self.trunk_channels < 1:
            raise ConfigError('cfab_count must be >= 0 and trunk_channels >= 1')
        if len(self.adpn_channels) != 4 or min(self.adpn_channels) < 1:
            raise ConfigError('adpn_channels must be four positive widths, got {}'.format(self.adpn_channels))
        if not self.bin_sizes or min(self.bin_sizes) < 1:
            raise ConfigError('bin_sizes must be positive, got {}'.format(self.bin_sizes))
        for name, cls in (('components', ComponentSet), ('loss_variant', LossVariant),
                          ('depth_relation', DepthRelation), ('upsample', UpsampleMode)):
            if not isinstance(getattr(self, name), cls):
                raise ConfigError('{} must be a {}, got {!r}'.format(name, cls.__name__, getattr(self, name)))
        for t in self.perceptual_taps:
            if t not in VGG16_POOL_INDEX:
                raise ConfigError('unknown perceptual tap {}, expected one of {}'.format(t, sorted(VGG16_POOL_INDEX)))
        if self.effective_weights.per > 0 and self.perceptual_taps:
            need = 2 ** max(int(t[-1]) for t in self.perceptual_taps)
            if min(self.patch_h, self.patch_w) < need:
                raise ConfigError('perceptual taps {} need patches of at least {}x{}'.format(
                    list(self.perceptual_taps), need, need))

    @property
    def effective_weights(self) -> LossWeights:
        """Loss weights with the terms outside loss_variant zeroed."""
        return self.weights.for_variant(self.loss_variant)

    @property
    def semi_supervised(self) -> bool:
        return self.loss_variant.semi_supervised and self.branch_ratio[1] > 0

    def generator_kwargs(self) -> Dict:
        return {
            'components': self.components,
            'trunk_channels': self.trunk_channels,
            'adpn_channels': self.adpn_channels,
            'bin_sizes': self.bin_sizes,
            'relation': self.depth_relation,
            'upsample': self.upsample,
            'scaled_attention': self.scaled_attention,
            'identity_head': self.identity_head,
            'cfab_count': self.cfab_count,
        }

    def replace(self, **kwargs) -> "TrainConfig":
        data = vars(self)
        for k, v in kwargs.items():
            if k not in data:
                raise ConfigError('unknown config key: {}'.format(k))
            data[k] = v
        return TrainConfig.from_dict(data)

    @property
    def __dict__(self):
        return {
            'lr_gen': self.lr_gen,
            'lr_disc': self.lr_disc,
            'momentum1': self.momentum1,
            'momentum2': self.momentum2,
            'weight_decay': self.weight_decay,
            'batch': self.batch,
            'patch_h': self.patch_h,
            'patch_w': self.patch_w,
            'weights': vars(self.weights),
            'branch_ratio': '{}:{}'.format(*self.branch_ratio),
            'max_steps': self.max_steps,
            'seed': self.seed,
            'components': self.components.label,
            'loss_variant': self.loss_variant.label,
            'depth_relation': self.depth_relation.value,
            'scaled_attention': self.scaled_attention,
            'checkpoint_every': self.checkpoint_every,
            'out_dir': self.out_dir,
            'dark_channel_patch': self.dark_channel_patch,
            'perceptual_pretrained': self.perceptual_pretrained,
            'perceptual_taps': list(self.perceptual_taps),
            'identity_head': self.identity_head,
            'upsample': self.upsample.value,
            'cfab_count': self.cfab_count,
            'trunk_channels': self.trunk_channels,
            'adpn_channels': list(self.adpn_channels),
            'bin_sizes': list(self.bin_sizes),
            'ssim_luminance': self.ssim_luminance,
            'device': self.device,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TrainConfig":
        """Build from the JSON form produced by vars(config); missing keys take defaults."""
        known = _defaults()
        kwargs = {}
        try:
            for k, v in data.items():
                if k not in known:
                    raise ConfigError('unknown config key: {}'.format(k))
                if k == 'weights':
                    kwargs[k] = v if isinstance(v, LossWeights) else LossWeights.from_dict(v)
                elif k == 'branch_ratio':
                    kwargs[k] = _parse_ratio(v)
                elif k == 'components':
                    kwargs[k] = v if isinstance(v, ComponentSet) else ComponentSet.from_label(v)
                elif k == 'loss_variant':
                    kwargs[k] = v if isinstance(v, LossVariant) else LossVariant.from_label(v)
                elif k == 'depth_relation':
                    kwargs[k] = DepthRelation(v)
                elif k == 'upsample':
                    kwargs[k] = UpsampleMode(v)
                else:
                    kwargs[k] = v
        except ParamError as e:
            raise ConfigError(e.message)
        except ValueError as e:
            raise ConfigError(str(e))
        return cls(**kwargs)


def _defaults() -> Dict:
    return vars(TrainConfig())


def _parse_ratio(v) -> Tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    parts = str(v).split(':')
    if len(parts) != 2:
        raise ValueError('branch_ratio must look like a:b, got {}'.format(v))
    return int(parts[0]), int(parts[1])


def _coerce(key: str, raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in _TRUE:
            return True
        if raw.lower() in _FALSE:
            return False
        raise ConfigError('{} expects a boolean, got {}'.format(key, raw))
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            items = [s.strip() for s in raw.strip('()[]').split(',') if s.strip()]
            if default and isinstance(default[0], int):
                return [int(s) for s in items]
            return items
    except ValueError:
        raise ConfigError('{} expects a {}, got {}'.format(key, type(default).__name__, raw))
    return raw


def apply_overrides(data: Dict, pairs: Iterable[Tuple[str, str]]) -> Dict:
    """
    Apply `key = value` pairs on top of a JSON config dict, coercing each value to the type
    of the key's default. Loss weights are addressed as weights.<term>.
    """
    defaults = _defaults()
    res = dict(data)
    res['weights'] = dict(res.get('weights', defaults['weights']))
    for key, raw in pairs:
        if key.startswith('weights.'):
            term = key[len('weights.'):]
            if term not in defaults['weights']:
                raise ConfigError('unknown loss weight: {}'.format(term))
            res['weights'][term] = _coerce(key, raw, defaults['weights'][term])
            continue
        if key not in defaults or key == 'weights':
            raise ConfigError('unknown config key: {}'.format(key))
        res[key] = _coerce(key, raw, defaults[key])
    return res


def parse_config_text(text: str, source: str = '<config>') -> List[Tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError('{}:{}: expected key = value, got {!r}'.format(source, lineno, line))
        key, value = line.split('=', 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_overrides(items: Optional[Iterable[str]]) -> List[Tuple[str, str]]:
    pairs = []
    for item in items or []:
        if '=' not in item:
            raise ConfigError('override must look like key=value, got {!r}'.format(item))
        key, value = item.split('=', 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_config(path: Optional[str] = None,
                overrides: Optional[Iterable[str]] = None,
                seed: Optional[int] = None) -> TrainConfig:
    """
    Read a flat `key = value` config file and apply command line overrides on top.

    Args:
        path: config file, None for the defaults
        overrides: `key=value` strings, they win over the file
        seed: wins over both when set

    Returns:
        TrainConfig
    """
    pairs = []
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise DatasetIOError(path, str(e))
        pairs.extend(parse_config_text(text, source=os.path.basename(path)))
    pairs.extend(parse_overrides(overrides))
    if seed is not None:
        pairs.append(('seed', str(seed)))
    return TrainConfig.from_dict(apply_overrides({}, pairs))


def dump_config(config: TrainConfig) -> str:
    return json.dumps(vars(config), ensure_ascii=False, indent=2)
