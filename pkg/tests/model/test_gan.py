import unittest

import torch

from moregan.exceptions import ParamError
from moregan.model.enum import ComponentSet, KeySampling
from moregan.model.gan import Discriminator, GanTopology, Generator, discriminator_forward, \
    generator_forward, reconstruct_rain

SMALL = dict(trunk_channels=8, adpn_channels=(4, 4, 8, 8), bin_sizes=(1, 2, 4))


class TestGenerator(unittest.TestCase):

    def test_identity_at_init(self):
        torch.manual_seed(0)
        g = Generator(**SMALL).eval()
        x = torch.rand(2, 3, 32, 48)
        with torch.no_grad():
            out = generator_forward(x, g)
        torch.testing.assert_close(out.derained, x, atol=0, rtol=0)
        self.assertEqual(tuple(out.depth.shape), (2, 1, 32, 48))

    def test_output_range(self):
        torch.manual_seed(1)
        g = Generator(identity_head=False, **SMALL).eval()
        with torch.no_grad():
            out = g(torch.rand(1, 3, 32, 32))
        self.assertTrue(bool(((out.derained >= 0) & (out.derained <= 1)).all()))

    def test_component_sets(self):
        for components in ComponentSet:
            g = Generator(components, **SMALL)
            self.assertEqual(g.adpn is not None, components.depth_net)
            self.assertEqual(g.pdnl is not None, components.non_local is not None)
            with torch.no_grad():
                out = g.eval()(torch.rand(1, 3, 32, 32))
            self.assertEqual(out.depth is None, not components.depth_net)
        self.assertIs(Generator(ComponentSet.M_E, **SMALL).pdnl.sampling, KeySampling.IDENTITY)

    def test_baseline_has_no_cfab(self):
        g = Generator(ComponentSet.M_A, cfab_count=4, **SMALL)
        self.assertEqual(g.cfpn.cfab_count, 0)
        self.assertEqual(Generator(ComponentSet.OURS, cfab_count=2, **SMALL).cfpn.cfab_count, 2)

    def test_namespaces(self):
        self.assertEqual(set(Generator(**SMALL).namespaces()), {'adpn', 'cfpn', 'pdnl', 'gen'})
        self.assertEqual(set(Generator(ComponentSet.M_B, **SMALL).namespaces()), {'cfpn', 'gen'})

    def test_invalid_size(self):
        with self.assertRaises(ParamError):
            Generator(**SMALL)(torch.rand(1, 3, 24, 32))

    def test_finite_on_random_inputs(self):
        gen = torch.Generator().manual_seed(9)
        for trial in range(100):
            torch.manual_seed(trial)
            g = Generator(identity_head=False, **SMALL).eval()
            with torch.no_grad():
                out = g(torch.rand(1, 3, 32, 32, generator=gen))
            self.assertTrue(bool(torch.isfinite(out.derained).all()), trial)
            self.assertTrue(bool(torch.isfinite(out.depth).all()), trial)


class TestDiscriminator(unittest.TestCase):

    def test_patch_size(self):
        d = Discriminator(base_channels=8)
        out = discriminator_forward(torch.rand(1, 3, 64, 128), d)
        self.assertEqual(tuple(out.shape), (1, 1, 8, 16))

    def test_invalid(self):
        with self.assertRaises(ParamError):
            Discriminator(base_channels=8)(torch.rand(1, 3, 20, 32))


class TestGanTopology(unittest.TestCase):

    def test_sharing(self):
        topology = GanTopology.build(**SMALL)
        self.assertIs(topology.gr, topology.gs)
        gen_ids = {id(p) for p in topology.gs.parameters()}
        prime_ids = {id(p) for p in topology.gr_prime.parameters()}
        self.assertFalse(gen_ids & prime_ids)
        disc_ids = {id(p) for p in topology.discriminator_parameters()}
        self.assertFalse(disc_ids & {id(p) for p in topology.generator_parameters()})

    def test_rejects_shared_prime(self):
        g = Generator(**SMALL)
        with self.assertRaises(ParamError):
            GanTopology(g, g, Discriminator(), Discriminator())

    def test_reconstruct_rain(self):
        topology = GanTopology.build(**SMALL)
        x = torch.rand(1, 3, 32, 32)
        with torch.no_grad():
            torch.testing.assert_close(reconstruct_rain(x, topology.gr_prime.eval()), x)


if __name__ == '__main__':
    unittest.main()
