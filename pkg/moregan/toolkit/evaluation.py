import json
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from tqdm import tqdm

from moregan import debug
from moregan.exceptions import ConfigError, DatasetIOError
from moregan.model.adpn import ENCODER_STRIDE
from moregan.model.enum import ComponentSet, LossVariant
from moregan.model.gan import Generator
from moregan.rainsim.dataset import MANIFEST_NAME
from moregan.toolkit import imageio
from moregan.toolkit.hashing import Hash, short_id
from moregan.toolkit.metrics import is_identical, psnr, ssim
from moregan.trainer.checkpoint import checkpoint_id, load_generator
from moregan.trainer.config import TrainConfig
from moregan.trainer.data import load_paired, load_unpaired
from moregan.trainer.semi import train

ROW_COLUMNS = ['index', 'name', 'psnr_db', 'identical', 'ssim', 'rainy_psnr_db', 'rainy_ssim']


def quantize(img: np.ndarray) -> np.ndarray:
    """Snap to the 8-bit grid the images are stored on."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def dataset_id(root: str) -> str:
    """mmh3 hex of the manifest, or of the sorted rainy file listing when there is none."""
    manifest = os.path.join(root, MANIFEST_NAME)
    if os.path.isfile(manifest):
        return Hash.file_hex(manifest)
    names = [os.path.basename(p) for p in imageio.list_images(os.path.join(root, 'rainy'))]
    return Hash.mmh3_hex('\n'.join(names))


class MetricReport:
    """
    Per-image PSNR/SSIM rows and their dataset means.

    PSNR of identical images is never averaged in; such rows carry identical=True and
    psnr_db=None, and mean_psnr_db is None when every row is identical.
    """

    def __init__(self, rows: List[Dict], checkpoint_id: str = '', dataset_id: str = '',
                 config: Optional[Dict] = None):
        self.rows = rows
        self.checkpoint_id = checkpoint_id
        self.dataset_id = dataset_id
        self.config = config or {}

    @property
    def identical_count(self) -> int:
        return sum(1 for r in self.rows if r['identical'])

    @property
    def mean_psnr_db(self) -> Optional[float]:
        finite = [r['psnr_db'] for r in self.rows if not r['identical']]
        return float(np.mean(finite)) if finite else None

    @property
    def mean_ssim(self) -> Optional[float]:
        return float(np.mean([r['ssim'] for r in self.rows])) if self.rows else None

    @property
    def stem(self) -> str:
        return 'eval_{}_{}'.format(short_id(self.checkpoint_id) or 'none', short_id(self.dataset_id) or 'none')

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=ROW_COLUMNS)

    @property
    def __dict__(self):
        return {
            'metadata': {
                'checkpoint_id': self.checkpoint_id,
                'dataset_id': self.dataset_id,
                'config': self.config,
            },
            'mean': {
                'psnr_db': self.mean_psnr_db,
                'ssim': self.mean_ssim,
                'identical': self.identical_count,
                'count': len(self.rows),
            },
            'rows': self.rows,
        }

    def write(self, out_dir: str) -> Dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        json_path = os.path.join(out_dir, self.stem + '.json')
        csv_path = os.path.join(out_dir, self.stem + '.csv')
        try:
            with open(json_path, 'w', encoding='utf-8') as f:
                f.write(json.dumps(vars(self), ensure_ascii=False, indent=2))
        except OSError as e:
            raise DatasetIOError(json_path, str(e))
        self.to_frame().to_csv(csv_path, index=False)
        return {'json': json_path, 'csv': csv_path}


def score_row(index: int, name: str, output: np.ndarray, target: np.ndarray,
              rainy: Optional[np.ndarray] = None, luminance: bool = False) -> Dict:
    """One report row; output and target are compared on the 8-bit grid."""
    output, target = quantize(output), quantize(target)
    p = psnr(output, target)
    row = {
        'index': index,
        'name': name,
        'psnr_db': None if is_identical(p) else p,
        'identical': is_identical(p),
        'ssim': ssim(output, target, luminance=luminance),
        'rainy_psnr_db': None,
        'rainy_ssim': None,
    }
    if rainy is not None:
        rainy = quantize(rainy)
        rp = psnr(rainy, target)
        row['rainy_psnr_db'] = None if is_identical(rp) else rp
        row['rainy_ssim'] = ssim(rainy, target, luminance=luminance)
    return row


def _pad_to(x: torch.Tensor, multiple: int) -> torch.Tensor:
    h, w = x.shape[-2:]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return x
    return F.pad(x, (0, pw, 0, ph), mode='replicate')


def derain_image(generator: Generator, rainy: np.ndarray, device: str = 'cpu'):
    """
    Run the generator on one [H,W,3] image of any size of at least 16x16; the input is
    padded to a multiple of 16 and the outputs cropped back.

    Returns:
        (derained [H,W,3], depth [H,W,1] or None)
    """
    h, w = rainy.shape[:2]
    if h < ENCODER_STRIDE or w < ENCODER_STRIDE:
        raise ConfigError('image of {}x{} is smaller than {}x{}'.format(h, w, ENCODER_STRIDE, ENCODER_STRIDE))
    x = _pad_to(imageio.to_tensor(rainy).to(device), ENCODER_STRIDE)
    with torch.no_grad():
        out = generator(x)
    derained = imageio.to_image(out.derained[..., :h, :w])
    depth = imageio.to_image(out.depth[..., :h, :w]) if out.depth is not None else None
    return derained, depth


def side_by_side(rainy: np.ndarray, derained: np.ndarray, clean: np.ndarray,
                 depth: Optional[np.ndarray]) -> np.ndarray:
    """rainy | derained | clean | predicted depth, depth drawn in gray (black when absent)."""
    if depth is None:
        depth = np.zeros(rainy.shape[:2] + (1,))
    return np.concatenate([rainy, derained, clean, np.repeat(depth, 3, axis=2)], axis=1)


def evaluate(checkpoint: str, dataset_root: str, out_dir: Optional[str] = None,
             grids: bool = False, luminance: Optional[bool] = None, device: str = 'cpu',
             show_progress: bool = True) -> MetricReport:
    """
    Derain every pair of a paired dataset with a checkpoint's generator and score it
    against the clean images.

    Args:
        checkpoint: checkpoint path
        dataset_root: paired dataset root
        out_dir: when set, receives the JSON and CSV report and, with grids, PNG grids
        grids: write rainy | derained | clean | depth PNGs
        luminance: SSIM on luma only, the checkpoint config's ssim_luminance when None
        device: torch device

    Returns:
        MetricReport
    """
    generator, config = load_generator(checkpoint, device)
    if luminance is None:
        luminance = config.ssim_luminance
    paired = load_paired(dataset_root)
    report = MetricReport([], checkpoint_id(checkpoint), dataset_id(dataset_root), vars(config))
    grid_dir = os.path.join(out_dir, report.stem + '_grids') if (out_dir and grids) else None
    if grid_dir:
        os.makedirs(grid_dir, exist_ok=True)
    for i in tqdm(range(len(paired)), desc='eval', disable=not show_progress):
        rainy, clean, _ = paired.load(i)
        derained, depth = derain_image(generator, rainy, device)
        name = os.path.basename(paired.rainy_paths[i])
        report.rows.append(score_row(i, name, derained, clean, rainy, luminance))
        if grid_dir:
            imageio.write_rgb(os.path.join(grid_dir, name), side_by_side(rainy, derained, clean, depth))
    debug.Info('evaluated %d images, mean PSNR %s dB, mean SSIM %s',
               len(report.rows), report.mean_psnr_db, report.mean_ssim)
    if out_dir:
        report.write(out_dir)
    return report


ABLATION_COLUMNS = ['label', 'components', 'loss_variant', 'psnr_db', 'ssim', 'identical', 'checkpoint']


def ablation_matrix(kind: str) -> List[Dict]:
    """Standard grids: 'components' (M-A ... Ours) or 'losses' (V0 ... V7)."""
    if kind == 'components':
        return [{'components': c.label} for c in ComponentSet]
    if kind == 'losses':
        return [{'loss_variant': v.label} for v in LossVariant]
    raise ConfigError('unknown ablation grid: {}'.format(kind))


def _label(entry: Dict) -> str:
    return ','.join('{}={}'.format(k, getattr(v, 'label', v)) for k, v in sorted(entry.items())) or 'base'


def ablate(matrix: Sequence[Dict], paired_root: str, base: TrainConfig,
           unpaired_root: Optional[str] = None, out_dir: Optional[str] = None,
           show_progress: bool = True) -> pd.DataFrame:
    """
    Train and evaluate one run per matrix entry.

    Args:
        matrix: config overrides per run, e.g. {'components': 'M-A'} or {'loss_variant': 'V0'}
        paired_root: training pairs, also the evaluation set
        base: configuration every entry starts from
        unpaired_root: real rainy images for the unsupervised branch, the rainy half of
            paired_root when None
        out_dir: root of the per-run directories and ablation.csv

    Returns:
        one row per entry, in matrix order
    """
    root = out_dir or base.out_dir
    configs = []
    for k, entry in enumerate(matrix):
        if 'out_dir' in entry:
            raise ConfigError('ablation entries may not set out_dir')
        configs.append(base.replace(out_dir=os.path.join(root, 'run_{:02d}'.format(k)), **entry))

    rows = []
    if configs:
        paired = load_paired(paired_root)
        unpaired = load_unpaired(unpaired_root or paired_root)
    for entry, config in zip(matrix, configs):
        label = _label(entry)
        debug.Info('ablation run %s', label)
        run_unpaired = unpaired if config.semi_supervised else None
        path = train(config, paired, run_unpaired, show_progress=show_progress)
        report = evaluate(path, paired_root, out_dir=config.out_dir, show_progress=show_progress)
        rows.append({
            'label': label,
            'components': config.components.label,
            'loss_variant': config.loss_variant.label,
            'psnr_db': report.mean_psnr_db,
            'ssim': report.mean_ssim,
            'identical': report.identical_count,
            'checkpoint': path,
        })
    table = pd.DataFrame(rows, columns=ABLATION_COLUMNS)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        table.to_csv(os.path.join(out_dir, 'ablation.csv'), index=False)
    return table
