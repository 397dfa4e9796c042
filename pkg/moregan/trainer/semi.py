import json
import math
import os
import random
from typing import Dict, Iterable, Optional

import numpy as np
import torch
import torch.nn as nn
from tqdm import tqdm

from moregan import debug
from moregan.exceptions import ConfigError, NumericAbortError
from moregan.loss.losses import cycle_loss, dc_loss, lsgan_d_loss, lsgan_g_loss, multi_task_loss, \
    perceptual_loss, tv_loss
from moregan.loss.perceptual import FeatureExtractor, Vgg16Extractor
from moregan.loss.weights import LossReport, total_loss
from moregan.model.enum import Branch, LossTerm
from moregan.model.gan import GanTopology, reconstruct_rain
from moregan.toolkit.hashing import Hash
from moregan.trainer import checkpoint as ckpt
from moregan.trainer.config import TrainConfig
from moregan.trainer.data import BatchStream, PairedDataset, SupervisedBatch, UnpairedDataset, \
    UnsupervisedBatch

TRAIN_LOG_NAME = 'train_log.jsonl'


def seed_everything(seed: int):
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    torch.backends.cudnn.deterministic = True
    torch.backends.cudnn.benchmark = False


def set_requires_grad(module: nn.Module, flag: bool):
    for p in module.parameters():
        p.requires_grad_(flag)


def parameter_fingerprint(params: Iterable[torch.Tensor]) -> str:
    """mmh3 hex over the raw bytes of the given tensors, in order."""
    data = b''.join(p.detach().cpu().contiguous().numpy().tobytes() for p in params)
    return Hash.mmh3_hex(data)


def branch_for_step(step: int, ratio) -> Branch:
    """Steps are 1-based; within every window of a+b steps the first a are supervised."""
    a, b = ratio
    return Branch.SUPERVISED if (step - 1) % (a + b) < a else Branch.UNSUPERVISED


class SemiTrainer:
    """
    Two-branch semi-supervised trainer. Every step updates the discriminator of its branch
    first, then the generator side; the two optimizers never share parameters.

    Args:
        config: run configuration
        topology: networks to train, built from config when None
        extractor: perceptual feature extractor, a frozen VGG-16 when None and the
            perceptual term is active
    """

    def __init__(self, config: TrainConfig, topology: Optional[GanTopology] = None,
                 extractor: Optional[FeatureExtractor] = None):
        self.config = config
        seed_everything(config.seed)
        self.device = torch.device(config.device)
        self.weights = config.effective_weights
        self.topology = topology if topology is not None else GanTopology.build(**config.generator_kwargs())
        self.topology.to(self.device).train()
        if extractor is None and self.weights.per > 0:
            extractor = Vgg16Extractor(config.perceptual_taps, pretrained=config.perceptual_pretrained)
        if isinstance(extractor, nn.Module):
            extractor.to(self.device)
        self.extractor = extractor
        betas = (config.momentum1, config.momentum2)
        self.opt_gen = torch.optim.Adam(list(self.topology.generator_parameters()), lr=config.lr_gen,
                                        betas=betas, weight_decay=config.weight_decay)
        self.opt_disc = torch.optim.Adam(list(self.topology.discriminator_parameters()), lr=config.lr_disc,
                                         betas=betas, weight_decay=config.weight_decay)
        self.step = 0
        self.last_checkpoint: Optional[str] = None
        self.last_disc_loss: Optional[float] = None

    def _check_finite(self, value: float, what: str):
        if not math.isfinite(value):
            debug.Warning('%s is %s at step %d, aborting', what, value, self.step)
            raise NumericAbortError(self.step, self.last_checkpoint)

    def _disc_update(self, disc: nn.Module, real: torch.Tensor, fake: torch.Tensor):
        set_requires_grad(disc, True)
        self.opt_disc.zero_grad(set_to_none=True)
        loss = lsgan_d_loss(disc(real), disc(fake.detach()))
        self._check_finite(float(loss.detach()), 'discriminator loss')
        loss.backward()
        self.opt_disc.step()
        self.last_disc_loss = float(loss.detach())

    def _gen_update(self, report: LossReport):
        self._check_finite(report.total, '{} loss'.format(report.branch.value))
        if report.value is None:
            return
        self.opt_gen.zero_grad(set_to_none=True)
        report.value.backward()
        self.opt_gen.step()

    def supervised_step(self, batch: SupervisedBatch) -> LossReport:
        """Update Ds, then the shared generator on the multi-task and adversarial terms."""
        batch = batch.to(self.device)
        gs, ds = self.topology.gs, self.topology.ds
        out = gs(batch.x_r)
        adversarial = self.weights.adv_super > 0
        self.last_disc_loss = None
        if adversarial:
            self._disc_update(ds, batch.x_g, out.derained)

        depth = out.depth if self.config.loss_variant.depth_supervised else None
        terms: Dict[LossTerm, torch.Tensor] = {
            LossTerm.MULTI: multi_task_loss(out.derained, batch.x_g, depth,
                                            batch.d_g if depth is not None else None),
        }
        set_requires_grad(ds, False)
        try:
            if adversarial:
                terms[LossTerm.ADV_SUPER] = lsgan_g_loss(ds(out.derained))
            report = total_loss(terms, self.weights, Branch.SUPERVISED)
            self._gen_update(report)
        finally:
            set_requires_grad(ds, True)
        return report

    def unsupervised_step(self, batch: UnsupervisedBatch) -> LossReport:
        """Update Dr, then Gr and Gr' on the cycle, adversarial and prior terms."""
        batch = batch.to(self.device)
        gr, dr = self.topology.gr, self.topology.dr
        w = self.weights
        y_d = gr(batch.y_r).derained
        adversarial = w.adv_unsuper > 0
        self.last_disc_loss = None
        if adversarial:
            self._disc_update(dr, batch.y_g, y_d)

        terms: Dict[LossTerm, torch.Tensor] = {}
        set_requires_grad(dr, False)
        try:
            if w.cyc > 0:
                terms[LossTerm.CYC] = cycle_loss(reconstruct_rain(y_d, self.topology.gr_prime), batch.y_r)
            if adversarial:
                terms[LossTerm.ADV_UNSUPER] = lsgan_g_loss(dr(y_d))
            if w.dc > 0:
                terms[LossTerm.DC] = dc_loss(y_d, self.config.dark_channel_patch)
            if w.tv > 0:
                terms[LossTerm.TV] = tv_loss(y_d)
            if w.per > 0 and self.extractor is not None:
                terms[LossTerm.PER] = perceptual_loss(y_d, batch.y_r, self.extractor)
            report = total_loss(terms, w, Branch.UNSUPERVISED)
            self._gen_update(report)
        finally:
            set_requires_grad(dr, True)
        return report

    def save(self, path: str) -> str:
        ckpt.save_topology(path, self.config, self.topology, step=self.step)
        self.last_checkpoint = path
        return path

    def _log_record(self, report: LossReport) -> Dict:
        record = {'step': self.step}
        record.update(vars(report))
        record['lr'] = {'gen': self.opt_gen.param_groups[0]['lr'], 'disc': self.opt_disc.param_groups[0]['lr']}
        record['disc'] = self.last_disc_loss
        return record

    def fit(self, paired: PairedDataset, unpaired: Optional[UnpairedDataset] = None,
            show_progress: bool = True) -> str:
        """
        Run config.max_steps steps and return the path of the final checkpoint.

        An initialisation checkpoint is written before the first step, then one every
        checkpoint_every steps and one after the last step. The JSON lines train log
        lives next to them.
        """
        config = self.config
        if not config.semi_supervised:
            unpaired = None
        elif unpaired is None:
            raise ConfigError('loss variant {} with branch_ratio {}:{} needs an unpaired dataset'.format(
                config.loss_variant.label, *config.branch_ratio))
        ratio = config.branch_ratio if unpaired is not None else (1, 0)

        os.makedirs(config.out_dir, exist_ok=True)
        stream = BatchStream(paired, unpaired, config.batch, config.patch_h, config.patch_w, config.seed)
        self.save(os.path.join(config.out_dir, ckpt.checkpoint_name(self.step)))
        debug.Info('training %s/%s for %d steps, ratio %d:%d', config.components.label,
                   config.loss_variant.label, config.max_steps, ratio[0], ratio[1])

        log_path = os.path.join(config.out_dir, TRAIN_LOG_NAME)
        with open(log_path, 'w', encoding='utf-8') as log:
            for _ in tqdm(range(config.max_steps), desc='train', disable=not show_progress):
                self.step += 1
                if branch_for_step(self.step, ratio) is Branch.SUPERVISED:
                    report = self.supervised_step(stream.next_supervised())
                else:
                    report = self.unsupervised_step(stream.next_unsupervised())
                record = self._log_record(report)
                log.write(json.dumps(record) + '\n')
                log.flush()
                debug.Debug(record)
                if self.step % config.checkpoint_every == 0 or self.step == config.max_steps:
                    self.save(os.path.join(config.out_dir, ckpt.checkpoint_name(self.step)))
        return self.last_checkpoint


def train(config: TrainConfig, paired: PairedDataset, unpaired: Optional[UnpairedDataset] = None,
          show_progress: bool = True) -> str:
    return SemiTrainer(config).fit(paired, unpaired, show_progress=show_progress)


def read_train_log(path: str):
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]
