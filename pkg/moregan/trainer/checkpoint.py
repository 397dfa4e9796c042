import os
from typing import Dict, Optional, Tuple

import torch
import torch.nn as nn

from moregan import debug
from moregan.exceptions import ConfigError, DatasetIOError
from moregan.model.gan import GanTopology, Generator
from moregan.toolkit.hashing import Hash, short_id
from moregan.trainer.config import TrainConfig

FORMAT_VERSION = 1
GENERATOR_NAMESPACES = ('adpn', 'cfpn', 'pdnl', 'gen')
ALL_NAMESPACES = GENERATOR_NAMESPACES + ('genprime', 'ds', 'dr')


def _state(module: nn.Module) -> Dict[str, torch.Tensor]:
    return {k: v.detach().cpu().clone() for k, v in module.state_dict().items()}


def topology_namespaces(topology: GanTopology) -> Dict[str, nn.Module]:
    res = dict(topology.gs.namespaces())
    res['genprime'] = topology.gr_prime
    res['ds'] = topology.ds
    res['dr'] = topology.dr
    return res


def checkpoint_name(step: int) -> str:
    return 'ckpt_{:06d}.pt'.format(step)


def save_checkpoint(path: str, config: TrainConfig, modules: Dict[str, nn.Module],
                    step: Optional[int] = None) -> str:
    """
    Write a single-file checkpoint.

    Args:
        path: output file
        config: echoed into the file
        modules: namespace to module; absent sub-networks are simply left out
        step: optimisation step the parameters belong to

    Returns:
        the checkpoint id, mmh3 hex of the written file
    """
    unknown = set(modules) - set(ALL_NAMESPACES)
    if unknown:
        raise ConfigError('unknown checkpoint namespace(s): {}'.format(sorted(unknown)))
    payload = {
        'format_version': FORMAT_VERSION,
        'config': vars(config),
        'step': step,
        'namespaces': {ns: _state(m) for ns, m in modules.items()},
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    try:
        torch.save(payload, path)
    except OSError as e:
        raise DatasetIOError(path, str(e))
    ckpt_id = checkpoint_id(path)
    debug.Info('checkpoint %s (step %s) written to %s', short_id(ckpt_id), step, path)
    return ckpt_id


def save_topology(path: str, config: TrainConfig, topology: GanTopology, step: Optional[int] = None) -> str:
    return save_checkpoint(path, config, topology_namespaces(topology), step)


def save_generator(path: str, config: TrainConfig, generator: Generator, step: Optional[int] = None) -> str:
    """Inference-only checkpoint holding the shared generator namespaces."""
    return save_checkpoint(path, config, generator.namespaces(), step)


def checkpoint_id(path: str) -> str:
    try:
        return Hash.file_hex(path)
    except OSError as e:
        raise DatasetIOError(path, str(e))


def load_checkpoint(path: str) -> Dict:
    try:
        payload = torch.load(path, map_location='cpu', weights_only=True)
    except FileNotFoundError as e:
        raise DatasetIOError(path, str(e))
    except Exception as e:
        raise DatasetIOError(path, 'not a readable checkpoint: {}'.format(e))
    if not isinstance(payload, dict) or 'namespaces' not in payload or 'config' not in payload:
        raise ConfigError('{} is not a checkpoint'.format(path))
    if payload.get('format_version') != FORMAT_VERSION:
        raise ConfigError('{} has format version {}, expected {}'.format(
            path, payload.get('format_version'), FORMAT_VERSION))
    return payload


def _restore(modules: Dict[str, nn.Module], namespaces: Dict[str, Dict], path: str):
    for ns, module in modules.items():
        if ns not in namespaces:
            raise ConfigError('{} has no {} parameters'.format(path, ns))
        try:
            module.load_state_dict(namespaces[ns], strict=True)
        except RuntimeError as e:
            raise ConfigError('{} does not fit the {} network: {}'.format(path, ns, e))


def restore_topology(path: str, topology: GanTopology) -> Dict:
    payload = load_checkpoint(path)
    _restore(topology_namespaces(topology), payload['namespaces'], path)
    return payload


def load_generator(path: str, device: str = 'cpu') -> Tuple[Generator, TrainConfig]:
    """
    Build the generator described by a checkpoint's config echo and load its weights.
    Only the gen, adpn, cfpn and pdnl namespaces are read.

    Returns:
        (generator in eval mode, config echo)
    """
    payload = load_checkpoint(path)
    config = TrainConfig.from_dict(payload['config'])
    generator = Generator(**config.generator_kwargs())
    _restore(generator.namespaces(), payload['namespaces'], path)
    generator.to(device).eval()
    return generator, config
