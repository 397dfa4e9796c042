from typing import Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from moregan.exceptions import ParamError
from moregan.model.enum import DepthRelation, KeySampling, UpsampleMode
from moregan.model.layers import check_channels, check_spatial, init_weights

RELATION_EPS = 1e-6
QUERY_STRIDE = 4
# queries kept by the stride-4 entry conv, one per QUERY_STRIDE x QUERY_STRIDE cell
EXECUTED_QUERY_REDUCTION = QUERY_STRIDE ** 2
DEFAULT_BIN_SIZES = (1, 2, 4, 8)


class PyramidPoolSpec:
    """
    Pyramid bin layout of the key sampler.

    Args:
        bin_sizes: each n contributes an n x n grid of bins, L = sum(n^2)
    """

    def __init__(self, bin_sizes: Sequence[int] = DEFAULT_BIN_SIZES):
        if not bin_sizes or any(int(n) < 1 for n in bin_sizes):
            raise ParamError('bin sizes must be positive, got {}'.format(bin_sizes))
        self.bin_sizes = tuple(int(n) for n in bin_sizes)

    @property
    def length(self) -> int:
        return sum(n * n for n in self.bin_sizes)

    @property
    def __dict__(self):
        return {'bin_sizes': list(self.bin_sizes), 'length': self.length}


def _bounds(size: int, n: int, i: int) -> Tuple[int, int]:
    return (i * size) // n, -((-(i + 1) * size) // n)


def pyramid_pool(f: torch.Tensor, logits: Optional[torch.Tensor], spec: PyramidPoolSpec) -> torch.Tensor:
    """
    Attention-weighted pyramid pooling.

    Inside every bin the logits are softmax-normalised over the bin's pixels and the
    features are averaged with those weights. Bins are emitted level by level, row-major
    within a level.

    Args:
        f: [B,C,H,W] features
        logits: [B,1,H,W] attention logits, None for plain average pooling
        spec: bin layout

    Returns:
        [B,L,C] pooled vectors
    """
    b, c, h, w = f.shape
    if logits is None:
        logits = f.new_zeros((b, 1, h, w))
    if logits.shape != (b, 1, h, w):
        raise ParamError('pooling logits must be [{},1,{},{}], got {}'.format(b, h, w, tuple(logits.shape)))
    pooled = []
    for n in spec.bin_sizes:
        if n > min(h, w):
            raise ParamError('bin size {} leaves empty bins on a {}x{} map'.format(n, h, w))
        if h % n == 0 and w % n == 0:
            fb = f.reshape(b, c, n, h // n, n, w // n).permute(0, 2, 4, 1, 3, 5).reshape(b, n * n, c, -1)
            lb = logits.reshape(b, 1, n, h // n, n, w // n).permute(0, 2, 4, 1, 3, 5).reshape(b, n * n, 1, -1)
            pooled.append((fb * torch.softmax(lb, dim=-1)).sum(dim=-1))
            continue
        # adaptive bins, possibly overlapping by one pixel
        level = []
        for i in range(n):
            r0, r1 = _bounds(h, n, i)
            for j in range(n):
                c0, c1 = _bounds(w, n, j)
                wts = torch.softmax(logits[:, :, r0:r1, c0:c1].reshape(b, 1, -1), dim=-1)
                level.append((f[:, :, r0:r1, c0:c1].reshape(b, c, -1) * wts).sum(dim=-1))
        pooled.append(torch.stack(level, dim=1))
    return torch.cat(pooled, dim=1)


def _check_positive(depth: torch.Tensor):
    if bool((depth <= 0).any()):
        raise ParamError('depth must be strictly positive')


def relation_from_depths(query_depth: torch.Tensor, key_depth: torch.Tensor,
                         variant: DepthRelation = DepthRelation.SYMMETRIC) -> torch.Tensor:
    """
    Depth relation between [B,N] query depths and [B,L] key depths, [B,N,L] in (0,1].
    """
    _check_positive(query_depth)
    _check_positive(key_depth)
    di = query_depth.unsqueeze(-1)
    dj = key_depth.unsqueeze(-2)
    if variant is DepthRelation.SYMMETRIC:
        return torch.minimum(di / (dj + RELATION_EPS), dj / (di + RELATION_EPS))
    if variant is DepthRelation.LITERAL:
        return torch.minimum(di / (di + RELATION_EPS), dj / (dj + RELATION_EPS))
    raise ParamError('unknown depth relation variant: {}'.format(variant))


def depth_relation(depth: torch.Tensor,
                   spec: PyramidPoolSpec,
                   variant: DepthRelation = DepthRelation.SYMMETRIC,
                   logits: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Depth relation map between stride-4 query depths and pyramid-pooled key depths.

    Args:
        depth: [B,1,H,W] strictly positive depth
        spec: bin layout of the keys
        variant: symmetric ratio (default) or the literal per-argument form
        logits: [B,1,H,W] pooling attention logits shared with the feature keys

    Returns:
        [B, H/4 * W/4, L] relation map
    """
    check_spatial(depth, QUERY_STRIDE, 'depth_relation')
    _check_positive(depth)
    query = depth[:, 0, ::QUERY_STRIDE, ::QUERY_STRIDE].flatten(1)
    keys = pyramid_pool(depth, logits, spec)[..., 0]
    return relation_from_depths(query, keys, variant)


def feature_relation(f_ds: torch.Tensor, keys: torch.Tensor,
                     w_theta: torch.Tensor, w_phi: torch.Tensor) -> torch.Tensor:
    """
    R_f = row-softmax(theta . phi^T) with theta = f_ds W_theta, phi = keys W_phi.

    Args:
        f_ds: [B,N,C] query tokens
        keys: [B,L,C] key tokens
        w_theta, w_phi: [C, C'] projections

    Returns:
        [B,N,L] relation map, rows sum to 1
    """
    if f_ds.dim() != 3 or keys.dim() != 3 or f_ds.shape[0] != keys.shape[0] \
            or f_ds.shape[-1] != keys.shape[-1]:
        raise ParamError('query tokens {} and keys {} are inconsistent'.format(
            tuple(f_ds.shape), tuple(keys.shape)))
    c = f_ds.shape[-1]
    if w_theta.shape[0] != c or w_phi.shape[0] != c or w_theta.shape[1] != w_phi.shape[1]:
        raise ParamError('projections {} and {} do not match {} channels'.format(
            tuple(w_theta.shape), tuple(w_phi.shape), c))
    theta = f_ds @ w_theta
    phi = keys @ w_phi
    return torch.softmax(theta @ phi.transpose(1, 2), dim=-1)


class PyramidDepthNonLocal(nn.Module):
    """
    Pyramid depth-guided non-local block.

    Queries are the stride-4 entry-conv features, keys are attention-weighted pyramid
    pools of the full resolution features (or every query position with
    KeySampling.IDENTITY). The attention weights are row-softmax(R_d * R_f); the
    aggregated context is upsampled back and added to the input.
    """

    def __init__(self,
                 channels: int = 64,
                 spec: Optional[PyramidPoolSpec] = None,
                 sampling: KeySampling = KeySampling.PYRAMID,
                 relation: DepthRelation = DepthRelation.SYMMETRIC,
                 upsample: UpsampleMode = UpsampleMode.BILINEAR):
        super().__init__()
        self.channels = channels
        self.spec = spec or PyramidPoolSpec()
        self.sampling = sampling
        self.relation = relation
        self.upsample = upsample
        self.entry = nn.Conv2d(channels, channels, kernel_size=QUERY_STRIDE, stride=QUERY_STRIDE)
        self.theta = nn.Linear(channels, channels, bias=False)
        self.phi = nn.Linear(channels, channels, bias=False)
        self.g = nn.Linear(channels, channels, bias=False)
        self.pool_attention = nn.Conv2d(channels, 1, kernel_size=1) if sampling is KeySampling.PYRAMID else None
        init_weights(self)

    def sample_keys(self, f: torch.Tensor, f_ds: torch.Tensor, depth: torch.Tensor):
        """Key tokens [B,L,C] and key depths [B,L]."""
        if self.sampling is KeySampling.PYRAMID:
            logits = self.pool_attention(f)
            keys = pyramid_pool(f, logits, self.spec)
            key_depth = pyramid_pool(depth, logits, self.spec)[..., 0]
        else:
            keys = f_ds.flatten(2).transpose(1, 2)
            key_depth = depth[:, 0, ::QUERY_STRIDE, ::QUERY_STRIDE].flatten(1)
        return keys, key_depth

    def interaction_count(self, h: int, w: int) -> int:
        """Query-key products this block computes on an [H,W] input, times C."""
        if h <= 0 or w <= 0 or h % QUERY_STRIDE or w % QUERY_STRIDE:
            raise ParamError('PyramidDepthNonLocal needs H,W divisible by {}, got {}x{}'.format(QUERY_STRIDE, h, w))
        stride_h, stride_w = self.entry.stride
        queries = (h // stride_h) * (w // stride_w)
        keys = self.spec.length if self.sampling is KeySampling.PYRAMID else queries
        return queries * keys * self.channels

    def forward(self, f: torch.Tensor, depth: torch.Tensor,
                depth_guidance: bool = True, return_weights: bool = False):
        check_spatial(f, QUERY_STRIDE, 'PyramidDepthNonLocal')
        check_channels(f, self.channels, 'PyramidDepthNonLocal')
        b, c, h, w = f.shape
        if depth.shape != (b, 1, h, w):
            raise ParamError('depth must be [{},1,{},{}], got {}'.format(b, h, w, tuple(depth.shape)))

        f_ds = self.entry(f)
        queries = f_ds.flatten(2).transpose(1, 2)
        keys, key_depth = self.sample_keys(f, f_ds, depth)
        r_f = feature_relation(queries, keys, self.theta.weight.t(), self.phi.weight.t())
        if depth_guidance:
            query_depth = depth[:, 0, ::QUERY_STRIDE, ::QUERY_STRIDE].flatten(1)
            r_d = relation_from_depths(query_depth, key_depth, self.relation)
            weights = torch.softmax(r_d * r_f, dim=-1)
        else:
            weights = torch.softmax(r_f, dim=-1)

        context = (weights @ self.g(keys)).transpose(1, 2).reshape(b, c, h // QUERY_STRIDE, w // QUERY_STRIDE)
        if self.upsample is UpsampleMode.BILINEAR:
            context = F.interpolate(context, size=(h, w), mode='bilinear', align_corners=False)
        else:
            context = F.interpolate(context, size=(h, w), mode='nearest')
        out = context + f
        if return_weights:
            return out, weights
        return out


def pdnl_forward(f: torch.Tensor, depth: torch.Tensor, block: PyramidDepthNonLocal) -> torch.Tensor:
    return block(f, depth)


class DenseNonLocal(nn.Module):
    """Standard embedded-Gaussian non-local block over all H*W positions, O(N^2 C)."""

    def __init__(self, channels: int = 64):
        super().__init__()
        self.channels = channels
        self.theta = nn.Linear(channels, channels, bias=False)
        self.phi = nn.Linear(channels, channels, bias=False)
        self.g = nn.Linear(channels, channels, bias=False)
        init_weights(self)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        check_channels(f, self.channels, 'DenseNonLocal')
        b, c, h, w = f.shape
        tokens = f.flatten(2).transpose(1, 2)
        weights = torch.softmax(self.theta(tokens) @ self.phi(tokens).transpose(1, 2), dim=-1)
        return (weights @ self.g(tokens)).transpose(1, 2).reshape(b, c, h, w) + f


def interaction_count(h: int, w: int, c: int, spec: PyramidPoolSpec,
                      query_reduction: int = QUERY_STRIDE) -> Tuple[int, int]:
    """
    Pairwise interaction counts of a dense non-local block and of PDNL.

    Args:
        query_reduction: N is divided by this to get the query count. The default 4 gives
            the customary N/4 figure (2048 queries at 64x128). PyramidDepthNonLocal runs
            N/16 queries through its stride-4 entry conv; pass EXECUTED_QUERY_REDUCTION, or
            use PyramidDepthNonLocal.interaction_count, for what the block executes.

    Returns:
        (dense, pdnl) with dense = N^2 C for N = H*W and pdnl = (N / query_reduction) L C
    """
    if h <= 0 or w <= 0 or c <= 0 or h % QUERY_STRIDE or w % QUERY_STRIDE:
        raise ParamError('invalid dims {}x{}x{}'.format(h, w, c))
    n = h * w
    if query_reduction < 1 or n % query_reduction:
        raise ParamError('query_reduction {} does not divide N={}'.format(query_reduction, n))
    return n * n * c, (n // query_reduction) * spec.length * c
