import os
import tempfile
import unittest

import torch

from moregan.exceptions import ConfigError, DatasetIOError
from moregan.model.enum import ComponentSet
from moregan.model.gan import GanTopology, Generator
from moregan.toolkit.hashing import Hash
from moregan.trainer.checkpoint import checkpoint_name, load_checkpoint, load_generator, restore_topology, \
    save_checkpoint, save_generator, save_topology
from tests.fixtures import small_config


def _same(a: torch.nn.Module, b: torch.nn.Module) -> bool:
    sa, sb = a.state_dict(), b.state_dict()
    return sa.keys() == sb.keys() and all(torch.equal(sa[k], sb[k]) for k in sa)


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.config = small_config(self.tmp.name)
        torch.manual_seed(0)
        self.topology = GanTopology.build(**self.config.generator_kwargs())
        self.path = os.path.join(self.tmp.name, checkpoint_name(7))

    def tearDown(self):
        self.tmp.cleanup()

    def test_name(self):
        self.assertEqual(checkpoint_name(7), 'ckpt_000007.pt')

    def test_topology_round_trip(self):
        ckpt_id = save_topology(self.path, self.config, self.topology, step=7)
        self.assertEqual(ckpt_id, Hash.file_hex(self.path))
        torch.manual_seed(1)
        other = GanTopology.build(**self.config.generator_kwargs())
        self.assertFalse(_same(self.topology.ds, other.ds))
        payload = restore_topology(self.path, other)
        self.assertEqual(payload['step'], 7)
        self.assertEqual(payload['config'], vars(self.config))
        self.assertTrue(_same(self.topology, other))
        self.assertEqual(set(payload['namespaces']), {'adpn', 'cfpn', 'pdnl', 'gen', 'genprime', 'ds', 'dr'})

    def test_load_generator(self):
        save_topology(self.path, self.config, self.topology)
        generator, config = load_generator(self.path)
        self.assertFalse(generator.training)
        self.assertEqual(vars(config), vars(self.config))
        self.assertTrue(_same(generator, self.topology.gs))

    def test_generator_only(self):
        save_generator(self.path, self.config, self.topology.gs)
        generator, _ = load_generator(self.path)
        self.assertTrue(_same(generator, self.topology.gs))
        with self.assertRaises(ConfigError):
            restore_topology(self.path, self.topology)

    def test_baseline_namespaces(self):
        config = self.config.replace(components=ComponentSet.M_A)
        generator = Generator(**config.generator_kwargs())
        save_generator(self.path, config, generator)
        self.assertEqual(set(load_checkpoint(self.path)['namespaces']), {'cfpn', 'gen'})
        loaded, _ = load_generator(self.path)
        self.assertIsNone(loaded.adpn)

    def test_missing_namespace(self):
        save_checkpoint(self.path, self.config, {'cfpn': self.topology.gs.cfpn})
        with self.assertRaises(ConfigError):
            load_generator(self.path)

    def test_unknown_namespace(self):
        with self.assertRaises(ConfigError):
            save_checkpoint(self.path, self.config, {'extra': self.topology.gs.cfpn})

    def test_architecture_mismatch(self):
        save_topology(self.path, self.config, self.topology)
        wider = GanTopology.build(**self.config.replace(trunk_channels=16).generator_kwargs())
        with self.assertRaises(ConfigError):
            restore_topology(self.path, wider)

    def test_bad_files(self):
        with self.assertRaises(DatasetIOError):
            load_checkpoint(os.path.join(self.tmp.name, 'missing.pt'))
        garbage = os.path.join(self.tmp.name, 'garbage.pt')
        with open(garbage, 'wb') as f:
            f.write(b'not a checkpoint')
        with self.assertRaises(DatasetIOError):
            load_checkpoint(garbage)
        torch.save({'format_version': 2, 'config': {}, 'namespaces': {}}, self.path)
        with self.assertRaises(ConfigError):
            load_checkpoint(self.path)
        torch.save({'weights': 1}, self.path)
        with self.assertRaises(ConfigError):
            load_checkpoint(self.path)


if __name__ == '__main__':
    unittest.main()
