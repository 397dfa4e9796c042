import math
import os
import tempfile
import unittest
from unittest import mock

import torch

from moregan.exceptions import ConfigError, NumericAbortError
from moregan.loss.perceptual import IdentityExtractor
from moregan.loss.weights import LossWeights
from moregan.model.enum import Branch, ComponentSet, LossTerm, LossVariant
from moregan.trainer.checkpoint import load_checkpoint
from moregan.trainer.data import BatchStream, load_paired, load_unpaired
from moregan.trainer.semi import TRAIN_LOG_NAME, SemiTrainer, branch_for_step, parameter_fingerprint, \
    read_train_log, train
from tests.fixtures import make_dataset, small_config


class TestSchedule(unittest.TestCase):

    def test_branch_for_step(self):
        self.assertEqual([branch_for_step(s, (1, 1)) for s in range(1, 5)],
                         [Branch.SUPERVISED, Branch.UNSUPERVISED] * 2)
        self.assertEqual([branch_for_step(s, (2, 1)).value[0] for s in range(1, 7)], list('ssussu'))
        self.assertTrue(all(branch_for_step(s, (1, 0)) is Branch.SUPERVISED for s in range(1, 5)))
        self.assertTrue(all(branch_for_step(s, (0, 1)) is Branch.UNSUPERVISED for s in range(1, 5)))


class TestSemiTrainer(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = make_dataset(cls.tmp.name, n=4)
        cls.paired = load_paired(cls.root)
        cls.unpaired = load_unpaired(cls.root)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def _out(self, name):
        return os.path.join(self.tmp.name, 'runs', name)

    def _trainer(self, name, **kwargs):
        return SemiTrainer(small_config(self._out(name), **kwargs), extractor=IdentityExtractor())

    def _stream(self, trainer):
        c = trainer.config
        return BatchStream(self.paired, self.unpaired, c.batch, c.patch_h, c.patch_w, c.seed)

    def test_supervised_step_updates(self):
        trainer = self._trainer('sup')
        t = trainer.topology
        before = {k: parameter_fingerprint(m.parameters()) for k, m in
                  (('gs', t.gs), ('prime', t.gr_prime), ('ds', t.ds), ('dr', t.dr))}
        report = trainer.supervised_step(self._stream(trainer).next_supervised())
        after = {k: parameter_fingerprint(m.parameters()) for k, m in
                 (('gs', t.gs), ('prime', t.gr_prime), ('ds', t.ds), ('dr', t.dr))}
        self.assertIs(report.branch, Branch.SUPERVISED)
        self.assertGreater(report.term(LossTerm.MULTI), 0.0)
        self.assertEqual(report.term(LossTerm.CYC), 0.0)
        self.assertNotEqual(before['gs'], after['gs'])
        self.assertNotEqual(before['ds'], after['ds'])
        self.assertEqual(before['prime'], after['prime'])
        self.assertEqual(before['dr'], after['dr'])
        self.assertIsNotNone(trainer.last_disc_loss)

    def test_unsupervised_step_updates(self):
        trainer = self._trainer('uns')
        t = trainer.topology
        ds_before = parameter_fingerprint(t.ds.parameters())
        dr_before = parameter_fingerprint(t.dr.parameters())
        gs_before = parameter_fingerprint(t.gs.parameters())
        report = trainer.unsupervised_step(self._stream(trainer).next_unsupervised())
        self.assertIs(report.branch, Branch.UNSUPERVISED)
        for term in (LossTerm.ADV_UNSUPER, LossTerm.DC, LossTerm.TV):
            self.assertGreater(report.term(term), 0.0)
        # identity-initialised generators reproduce the input exactly
        self.assertEqual(report.term(LossTerm.CYC), 0.0)
        self.assertEqual(report.term(LossTerm.MULTI), 0.0)
        self.assertEqual(parameter_fingerprint(t.ds.parameters()), ds_before)
        self.assertNotEqual(parameter_fingerprint(t.dr.parameters()), dr_before)
        self.assertNotEqual(parameter_fingerprint(t.gs.parameters()), gs_before)

    def test_disabled_adversarial_term(self):
        trainer = self._trainer('noadv', loss_variant=LossVariant.V1)
        ds_before = parameter_fingerprint(trainer.topology.ds.parameters())
        report = trainer.supervised_step(self._stream(trainer).next_supervised())
        self.assertEqual(report.term(LossTerm.ADV_SUPER), 0.0)
        self.assertIsNone(trainer.last_disc_loss)
        self.assertEqual(parameter_fingerprint(trainer.topology.ds.parameters()), ds_before)

    def test_fit(self):
        trainer = self._trainer('fit', max_steps=3, checkpoint_every=2)
        path = trainer.fit(self.paired, self.unpaired, show_progress=False)
        out = trainer.config.out_dir
        self.assertEqual(path, os.path.join(out, 'ckpt_000003.pt'))
        for step in (0, 2, 3):
            self.assertTrue(os.path.isfile(os.path.join(out, 'ckpt_{:06d}.pt'.format(step))))
        self.assertFalse(os.path.exists(os.path.join(out, 'ckpt_000001.pt')))
        log = read_train_log(os.path.join(out, TRAIN_LOG_NAME))
        self.assertEqual([r['step'] for r in log], [1, 2, 3])
        self.assertEqual([r['branch'] for r in log], ['supervised', 'unsupervised', 'supervised'])
        self.assertEqual(set(log[0]), {'step', 'branch', 'terms', 'total', 'lr', 'disc'})
        self.assertEqual(log[0]['lr'], {'gen': 5e-4, 'disc': 1e-5})
        self.assertEqual(load_checkpoint(path)['step'], 3)

    def test_zero_steps(self):
        trainer = self._trainer('zero', max_steps=0)
        path = trainer.fit(self.paired, self.unpaired, show_progress=False)
        self.assertTrue(path.endswith('ckpt_000000.pt'))
        self.assertEqual(read_train_log(os.path.join(trainer.config.out_dir, TRAIN_LOG_NAME)), [])

    def test_supervised_only_variant(self):
        trainer = self._trainer('v2', loss_variant=LossVariant.V2, max_steps=2)
        trainer.fit(self.paired, self.unpaired, show_progress=False)
        log = read_train_log(os.path.join(trainer.config.out_dir, TRAIN_LOG_NAME))
        self.assertEqual([r['branch'] for r in log], ['supervised', 'supervised'])

    def test_semi_variant_needs_unpaired(self):
        with self.assertRaises(ConfigError):
            self._trainer('nounp').fit(self.paired, None, show_progress=False)

    def test_plain_baseline(self):
        trainer = self._trainer('ma', components=ComponentSet.M_A, loss_variant=LossVariant.V0, max_steps=1)
        trainer.fit(self.paired, show_progress=False)
        self.assertIsNone(trainer.topology.gs.adpn)

    def test_numeric_abort(self):
        trainer = self._trainer('nan', max_steps=2)
        nan = torch.tensor(float('nan'), requires_grad=True)
        with mock.patch('moregan.trainer.semi.multi_task_loss', return_value=nan):
            with self.assertRaises(NumericAbortError) as ctx:
                trainer.fit(self.paired, self.unpaired, show_progress=False)
        self.assertEqual(ctx.exception.step, 1)
        self.assertTrue(ctx.exception.last_checkpoint.endswith('ckpt_000000.pt'))

    def test_determinism(self):
        runs = []
        for name in ('det_a', 'det_b'):
            trainer = self._trainer(name, max_steps=4, checkpoint_every=4)
            path = trainer.fit(self.paired, self.unpaired, show_progress=False)
            runs.append((read_train_log(os.path.join(trainer.config.out_dir, TRAIN_LOG_NAME)),
                         load_checkpoint(path)['namespaces']))
        (log_a, ns_a), (log_b, ns_b) = runs
        self.assertEqual(log_a, log_b)
        for ns in ns_a:
            for key in ns_a[ns]:
                self.assertTrue(torch.equal(ns_a[ns][key], ns_b[ns][key]), '{}.{}'.format(ns, key))

    def test_train_without_perceptual(self):
        config = small_config(self._out('plain'), max_steps=1, weights=LossWeights(per=0.0))
        with mock.patch('moregan.trainer.semi.Vgg16Extractor') as vgg:
            path = train(config, self.paired, self.unpaired, show_progress=False)
        vgg.assert_not_called()
        self.assertTrue(os.path.isfile(path))

    def test_single_image_batch(self):
        trainer = self._trainer('b1', batch=1, patch_h=16, patch_w=32, weights=LossWeights(per=0.0))
        stream = self._stream(trainer)
        for report in (trainer.supervised_step(stream.next_supervised()),
                       trainer.unsupervised_step(stream.next_unsupervised())):
            self.assertTrue(math.isfinite(report.total))
        self.assertGreater(trainer.last_disc_loss, 0.0)

    def test_supervised_ratio_without_unpaired(self):
        trainer = self._trainer('v7sup', branch_ratio=(1, 0), max_steps=2)
        self.assertFalse(trainer.config.semi_supervised)
        trainer.fit(self.paired, None, show_progress=False)
        log = read_train_log(os.path.join(trainer.config.out_dir, TRAIN_LOG_NAME))
        self.assertEqual([r['branch'] for r in log], ['supervised', 'supervised'])

    def test_logged_total_is_weighted_sum(self):
        trainer = self._trainer('total', max_steps=4, checkpoint_every=4)
        trainer.fit(self.paired, self.unpaired, show_progress=False)
        w = trainer.config.effective_weights
        for record in read_train_log(os.path.join(trainer.config.out_dir, TRAIN_LOG_NAME)):
            expected = sum(w.weight(LossTerm(k)) * v for k, v in record['terms'].items())
            self.assertAlmostEqual(record['total'], expected, places=9, msg=record['step'])

    def test_sub_steps_touch_one_side(self):
        trainer = self._trainer('iso')
        t = trainer.topology
        seen = []
        disc_update, gen_update = trainer._disc_update, trainer._gen_update

        def fingerprints():
            return (parameter_fingerprint(t.generator_parameters()),
                    parameter_fingerprint(t.discriminator_parameters()))

        def wrapped_disc(*args):
            before = fingerprints()
            disc_update(*args)
            seen.append(('disc', before, fingerprints()))

        def wrapped_gen(*args):
            before = fingerprints()
            gen_update(*args)
            seen.append(('gen', before, fingerprints()))

        stream = self._stream(trainer)
        with mock.patch.object(trainer, '_disc_update', side_effect=wrapped_disc), \
                mock.patch.object(trainer, '_gen_update', side_effect=wrapped_gen):
            for _ in range(2):
                trainer.supervised_step(stream.next_supervised())
                trainer.unsupervised_step(stream.next_unsupervised())
        self.assertEqual([s[0] for s in seen], ['disc', 'gen'] * 4)
        for kind, (g0, d0), (g1, d1) in seen:
            if kind == 'disc':
                self.assertEqual(g0, g1)
                self.assertNotEqual(d0, d1)
            else:
                self.assertEqual(d0, d1)
                self.assertNotEqual(g0, g1)


def _window_means(values, width):
    return [sum(values[i:i + width]) / width for i in range(0, len(values) - width + 1, width)]


class TestTrainingDynamics(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.single = load_paired(make_dataset(os.path.join(cls.tmp.name, 'single'), n=1))
        root = make_dataset(os.path.join(cls.tmp.name, 'four'), n=4)
        cls.paired = load_paired(root)
        cls.unpaired = load_unpaired(root)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_multi_task_loss_falls(self):
        config = small_config(os.path.join(self.tmp.name, 'sup'), loss_variant=LossVariant.V1)
        trainer = SemiTrainer(config, extractor=IdentityExtractor())
        stream = BatchStream(self.single, None, config.batch, config.patch_h, config.patch_w, config.seed)
        losses = [trainer.supervised_step(stream.next_supervised()).term(LossTerm.MULTI) for _ in range(500)]
        means = _window_means(losses, 20)
        self.assertGreater(means[0], means[len(means) // 2])
        self.assertGreater(means[len(means) // 2], means[-1])

    def test_cycle_residual_falls(self):
        config = small_config(os.path.join(self.tmp.name, 'cyc'), branch_ratio=(0, 1), identity_head=False,
                              weights=LossWeights(adv_unsuper=0.0, dc=0.0, tv=0.0, per=0.0))
        trainer = SemiTrainer(config, extractor=IdentityExtractor())
        stream = BatchStream(self.paired, self.unpaired, config.batch, config.patch_h, config.patch_w, config.seed)
        residuals = [trainer.unsupervised_step(stream.next_unsupervised()).term(LossTerm.CYC) for _ in range(200)]
        means = _window_means(residuals, 5)
        self.assertGreater(means[0], 0.0)
        self.assertGreater(means[0], means[-1])


if __name__ == '__main__':
    unittest.main()
