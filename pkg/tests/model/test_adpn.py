import unittest

import torch

from moregan.exceptions import ParamError
from moregan.model.adpn import DepthPredictionNet, SelfAttention, predict_depth, self_attention


class TestSelfAttention(unittest.TestCase):

    def test_zero_query_key_is_uniform(self):
        f = torch.randn(1, 4, 4, 4, dtype=torch.float64)
        zero = torch.zeros(4, 4, dtype=torch.float64)
        eye = torch.eye(4, dtype=torch.float64)
        out, weights = self_attention(f, zero, zero, eye, return_weights=True)
        torch.testing.assert_close(weights, torch.full((1, 16, 16), 1.0 / 16, dtype=torch.float64))
        mean = f.flatten(2).mean(dim=-1)[..., None, None]
        torch.testing.assert_close(out, f + mean)

    def test_zero_value_is_identity(self):
        f = torch.randn(2, 4, 4, 4, dtype=torch.float64)
        w = torch.randn(4, 4, dtype=torch.float64)
        out = self_attention(f, w, w, torch.zeros(4, 4, dtype=torch.float64))
        torch.testing.assert_close(out, f)

    def test_rows_sum_to_one(self):
        torch.manual_seed(0)
        f = torch.randn(2, 8, 4, 8)
        w = torch.randn(8, 8)
        _, weights = self_attention(f, w, w, w, scaled=True, return_weights=True)
        torch.testing.assert_close(weights.sum(-1), torch.ones(2, 32), atol=1e-5, rtol=0)

    def test_shape_errors(self):
        f = torch.randn(1, 4, 4, 4)
        with self.assertRaises(ParamError):
            self_attention(f, torch.randn(3, 4), torch.randn(4, 4), torch.randn(4, 4))
        with self.assertRaises(ParamError):
            self_attention(f, torch.randn(4, 4), torch.randn(4, 4), torch.randn(4, 2))
        with self.assertRaises(ParamError):
            self_attention(torch.randn(4, 4, 4), torch.randn(4, 4), torch.randn(4, 4), torch.randn(4, 4))

    def test_gradcheck(self):
        torch.manual_seed(1)
        f = torch.randn(1, 2, 8, 8, dtype=torch.float64, requires_grad=True)
        wq = torch.randn(2, 2, dtype=torch.float64, requires_grad=True)
        wk = torch.randn(2, 2, dtype=torch.float64, requires_grad=True)
        wv = torch.randn(2, 2, dtype=torch.float64, requires_grad=True)
        self.assertTrue(torch.autograd.gradcheck(lambda *a: self_attention(*a), (f, wq, wk, wv),
                                                 eps=1e-6, atol=1e-4, rtol=1e-4))

    def test_module_matches_function(self):
        block = SelfAttention(4)
        f = torch.randn(1, 4, 2, 2)
        expected = self_attention(f, block.query.weight.t(), block.key.weight.t(), block.value.weight.t())
        torch.testing.assert_close(block(f), expected)


class TestDepthPredictionNet(unittest.TestCase):

    def test_output_range_and_shape(self):
        torch.manual_seed(0)
        net = DepthPredictionNet((4, 4, 8, 8)).eval()
        with torch.no_grad():
            d = predict_depth(torch.rand(2, 3, 32, 48), net)
        self.assertEqual(tuple(d.shape), (2, 1, 32, 48))
        self.assertTrue(bool(((d > 0) & (d < 1)).all()))

    def test_plain_variant(self):
        net = DepthPredictionNet((4, 4, 8, 8), attention=False)
        self.assertIsNone(net.attention)

    def test_invalid(self):
        net = DepthPredictionNet((4, 4, 8, 8))
        with self.assertRaises(ParamError):
            net(torch.rand(1, 3, 24, 32))
        with self.assertRaises(ParamError):
            net(torch.rand(1, 1, 32, 32))
        with self.assertRaises(ParamError):
            DepthPredictionNet((4, 8, 8))

    def test_gradient_reaches_input(self):
        net = DepthPredictionNet((4, 4, 8, 8)).double()
        x = torch.rand(1, 3, 32, 32, dtype=torch.float64, requires_grad=True)
        net(x).sum().backward()
        self.assertTrue(bool(torch.isfinite(x.grad).all()))
        self.assertGreater(float(x.grad.abs().sum()), 0.0)

    def test_gradcheck_full_network(self):
        torch.manual_seed(4)
        net = DepthPredictionNet((4, 4, 8, 8)).double()
        x = torch.rand(1, 3, 32, 32, dtype=torch.float64, requires_grad=True)
        # a single random direction keeps the finite difference clear of ReLU kinks
        self.assertTrue(torch.autograd.gradcheck(net, (x,), eps=1e-7, atol=1e-5, rtol=1e-4, fast_mode=True))

    def test_overfits_single_pair(self):
        torch.manual_seed(5)
        gen = torch.Generator().manual_seed(5)
        depth = torch.linspace(0.1, 0.9, 32, dtype=torch.float32).view(1, 1, 32, 1).expand(1, 1, 32, 32)
        rainy = torch.rand(1, 3, 32, 32, generator=gen) * 0.2 + 0.4
        rainy[:, 1:2] = depth
        net = DepthPredictionNet((4, 4, 8, 8))
        opt = torch.optim.Adam(net.parameters(), lr=5e-3)
        for _ in range(500):
            opt.zero_grad()
            loss = torch.mean(torch.abs(net(rainy) - depth))
            loss.backward()
            opt.step()
        with torch.no_grad():
            err = float(torch.mean(torch.abs(net(rainy) - depth)))
        self.assertLess(err, 0.05)


if __name__ == '__main__':
    unittest.main()
