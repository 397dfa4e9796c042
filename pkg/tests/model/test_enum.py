import unittest

from moregan.model.enum import Branch, ComponentSet, KeySampling, LossTerm, LossVariant


class TestLossVariant(unittest.TestCase):

    def test_cumulative_terms(self):
        self.assertEqual(LossVariant.V0.terms, frozenset([LossTerm.MULTI]))
        self.assertEqual(LossVariant.V1.terms, frozenset([LossTerm.MULTI]))
        self.assertEqual(LossVariant.V2.terms, frozenset([LossTerm.MULTI, LossTerm.ADV_SUPER]))
        self.assertEqual(LossVariant.V7.terms, frozenset(LossTerm))
        variants = list(LossVariant)
        for prev, cur in zip(variants[1:], variants[2:]):
            self.assertEqual(len(cur.terms - prev.terms), 1)

    def test_flags(self):
        self.assertFalse(LossVariant.V0.depth_supervised)
        self.assertTrue(LossVariant.V1.depth_supervised)
        self.assertFalse(LossVariant.V2.semi_supervised)
        self.assertTrue(LossVariant.V3.semi_supervised)

    def test_from_label(self):
        self.assertIs(LossVariant.from_label('v5'), LossVariant.V5)
        with self.assertRaises(ValueError):
            LossVariant.from_label('V8')

    def test_term_branch(self):
        self.assertIs(LossTerm.ADV_SUPER.branch, Branch.SUPERVISED)
        self.assertIs(LossTerm.PER.branch, Branch.UNSUPERVISED)


class TestComponentSet(unittest.TestCase):

    def test_grid(self):
        self.assertEqual([c.label for c in ComponentSet], ['M-A', 'M-B', 'M-C', 'M-D', 'M-E', 'Ours'])
        self.assertEqual(ComponentSet.M_A.cfab_count, 0)
        self.assertFalse(ComponentSet.M_B.depth_net)
        self.assertFalse(ComponentSet.M_C.attention)
        self.assertIsNone(ComponentSet.M_D.non_local)
        self.assertIs(ComponentSet.M_E.non_local, KeySampling.IDENTITY)
        self.assertIs(ComponentSet.OURS.non_local, KeySampling.PYRAMID)

    def test_from_label(self):
        self.assertIs(ComponentSet.from_label('m-a'), ComponentSet.M_A)
        self.assertIs(ComponentSet.from_label('ours'), ComponentSet.OURS)
        self.assertIs(ComponentSet.from_label('M_E'), ComponentSet.M_E)
        with self.assertRaises(ValueError):
            ComponentSet.from_label('M-Z')


if __name__ == '__main__':
    unittest.main()
