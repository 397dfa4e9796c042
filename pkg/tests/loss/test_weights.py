import unittest

import torch

from moregan.exceptions import ParamError
from moregan.loss.weights import LossReport, LossWeights, total_loss
from moregan.model.enum import Branch, LossTerm, LossVariant


class TestLossWeights(unittest.TestCase):

    def test_defaults(self):
        self.assertEqual(vars(LossWeights()), {
            'multi': 1.0, 'adv_super': 0.5, 'cyc': 1.0, 'adv_unsuper': 0.5,
            'dc': 0.5, 'tv': 0.1, 'per': 0.5,
        })

    def test_negative(self):
        with self.assertRaises(ParamError):
            LossWeights(tv=-0.1)

    def test_for_variant(self):
        w = LossWeights().for_variant(LossVariant.V3)
        self.assertEqual(w.cyc, 1.0)
        self.assertEqual(w.adv_unsuper, 0.0)
        self.assertEqual(w.per, 0.0)
        self.assertEqual(vars(LossWeights().for_variant(LossVariant.V7)), vars(LossWeights()))

    def test_scaled(self):
        w = LossWeights().scaled(LossTerm.TV, 3.0)
        self.assertAlmostEqual(w.tv, 0.3)
        self.assertEqual(LossWeights().tv, 0.1)

    def test_from_dict(self):
        self.assertEqual(LossWeights.from_dict({'dc': 0.0}).dc, 0.0)
        with self.assertRaises(ParamError):
            LossWeights.from_dict({'gamma': 1.0})


class TestTotalLoss(unittest.TestCase):

    def test_unit_terms(self):
        report = total_loss({t: 1.0 for t in LossTerm}, LossWeights())
        self.assertAlmostEqual(report.total, 4.1, places=12)
        self.assertIsNone(report.value)

    def test_zero_weights(self):
        zero = LossWeights(**{t.value: 0.0 for t in LossTerm})
        report = total_loss({t: float('nan') for t in LossTerm}, zero)
        self.assertEqual(report.total, 0.0)

    def test_absent_terms(self):
        report = total_loss({LossTerm.MULTI: 2.0}, LossWeights(), Branch.SUPERVISED)
        self.assertEqual(report.total, 2.0)
        self.assertEqual(report.term(LossTerm.ADV_SUPER), 0.0)
        self.assertEqual(vars(report)['branch'], 'supervised')
        self.assertEqual(len(vars(report)['terms']), 7)

    def test_wrong_branch(self):
        with self.assertRaises(ParamError):
            total_loss({LossTerm.CYC: 1.0}, LossWeights(), Branch.SUPERVISED)

    def test_differentiable(self):
        x = torch.tensor(2.0, requires_grad=True)
        report = total_loss({LossTerm.TV: x * x, LossTerm.DC: x}, LossWeights(), Branch.UNSUPERVISED)
        self.assertAlmostEqual(report.total, 0.1 * 4 + 0.5 * 2, places=6)
        report.value.backward()
        self.assertAlmostEqual(float(x.grad), 0.1 * 4 + 0.5, places=6)
        self.assertIsInstance(report, LossReport)


if __name__ == '__main__':
    unittest.main()
