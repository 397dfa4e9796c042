import os
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from moregan import debug
from moregan.exceptions import ParamError
from moregan.model.pdnl import EXECUTED_QUERY_REDUCTION, DenseNonLocal, PyramidDepthNonLocal, PyramidPoolSpec, \
    interaction_count

REPEATS = 5
# bytes allowed for the dense N x N attention matrix
DENSE_MEMORY_BUDGET = 2 * 1024 ** 3
PROFILE_SEED = 7
COLUMNS = ['h', 'w', 'c', 'n', 'l', 'dense_interactions', 'pdnl_interactions', 'interaction_ratio',
           'executed_pdnl_interactions', 'executed_ratio',
           'dense_ms', 'pdnl_ms', 'speedup', 'note']


def median_time(fn: Callable[[], object], repeats: int = REPEATS) -> float:
    """Median wall time of fn in milliseconds, after one warm-up call."""
    fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append((time.perf_counter() - start) * 1000.0)
    return float(np.median(times))


def dense_attention_bytes(h: int, w: int, batch: int = 1) -> int:
    n = h * w
    return batch * n * n * 4


def _time_row(h: int, w: int, c: int, spec: PyramidPoolSpec, repeats: int, budget: int) -> Tuple:
    gen = torch.Generator().manual_seed(PROFILE_SEED)
    f = torch.randn(1, c, h, w, generator=gen)
    depth = torch.rand(1, 1, h, w, generator=gen) * 0.9 + 0.1
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(PROFILE_SEED)
        pdnl = PyramidDepthNonLocal(c, spec).eval()
        dense = DenseNonLocal(c).eval()
    with torch.no_grad():
        pdnl_ms = median_time(lambda: pdnl(f, depth), repeats)
        if dense_attention_bytes(h, w) > budget:
            debug.Warning('dense non-local at %dx%dx%d needs %d bytes, over the %d byte budget, skipped',
                          h, w, c, dense_attention_bytes(h, w), budget)
            return None, pdnl_ms, 'dense skipped: over memory budget'
        dense_ms = median_time(lambda: dense(f), repeats)
    return dense_ms, pdnl_ms, ''


def profile_pdnl(dims: Sequence[Tuple[int, int, int]],
                 spec: Optional[PyramidPoolSpec] = None,
                 repeats: int = REPEATS,
                 memory_budget: int = DENSE_MEMORY_BUDGET,
                 measure: bool = True,
                 out_dir: Optional[str] = None) -> pd.DataFrame:
    """
    Analytic interaction counts and measured wall times of the dense non-local block
    versus PDNL.

    pdnl_interactions counts N/4 queries against L keys; executed_pdnl_interactions counts
    the N/16 queries PyramidDepthNonLocal actually runs, the block whose time is measured.

    Args:
        dims: (H, W, C) triples, H and W multiples of 4
        spec: pyramid layout, the default (1,2,4,8) when None
        repeats: timed calls per measurement, the median is reported
        memory_budget: dense runs whose attention matrix exceeds this many bytes are skipped
        measure: only compute the analytic columns when False
        out_dir: when set, receives pdnl_profile.csv and pdnl_profile.png

    Returns:
        one row per dims entry, in input order
    """
    spec = spec or PyramidPoolSpec()
    rows: List[dict] = []
    for h, w, c in dims:
        dense_n, pdnl_n = interaction_count(h, w, c, spec)
        _, executed_n = interaction_count(h, w, c, spec, query_reduction=EXECUTED_QUERY_REDUCTION)
        row = {
            'h': h, 'w': w, 'c': c, 'n': h * w, 'l': spec.length,
            'dense_interactions': dense_n,
            'pdnl_interactions': pdnl_n,
            'interaction_ratio': dense_n / pdnl_n,
            'executed_pdnl_interactions': executed_n,
            'executed_ratio': dense_n / executed_n,
            'dense_ms': np.nan, 'pdnl_ms': np.nan, 'speedup': np.nan, 'note': '',
        }
        if measure:
            dense_ms, pdnl_ms, note = _time_row(h, w, c, spec, repeats, memory_budget)
            row['pdnl_ms'] = pdnl_ms
            row['note'] = note
            if dense_ms is not None:
                row['dense_ms'] = dense_ms
                row['speedup'] = dense_ms / pdnl_ms
        rows.append(row)
        debug.Debug(row)
    report = pd.DataFrame(rows, columns=COLUMNS)
    if out_dir is not None:
        write_profile(report, out_dir)
    return report


def write_profile(report: pd.DataFrame, out_dir: str) -> Tuple[str, str]:
    """Write the profile table as CSV and a log-log plot of time against N."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, 'pdnl_profile.csv')
    png_path = os.path.join(out_dir, 'pdnl_profile.png')
    report.to_csv(csv_path, index=False)

    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4), dpi=120)
    ordered = report.sort_values('n')
    for column, label in (('dense_ms', 'dense non-local'), ('pdnl_ms', 'PDNL')):
        valid = ordered[ordered[column].notna()]
        if len(valid):
            ax.plot(valid['n'], valid[column], marker='o', label=label)
    if ordered['dense_ms'].notna().any() or ordered['pdnl_ms'].notna().any():
        ax.set_xscale('log')
        ax.set_yscale('log')
        ax.legend()
    ax.set_xlabel('N = H x W')
    ax.set_ylabel('median time (ms)')
    fig.savefig(png_path, bbox_inches='tight')
    plt.close(fig)
    return csv_path, png_path


def parse_dims(text: str) -> List[Tuple[int, int, int]]:
    """'64x128x64,32x64x64' to [(64,128,64), (32,64,64)]."""
    dims = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        parts = item.lower().split('x')
        if len(parts) != 3:
            raise ParamError('dims must look like HxWxC, got {}'.format(item))
        try:
            dims.append(tuple(int(p) for p in parts))
        except ValueError:
            raise ParamError('dims must be integers, got {}'.format(item))
    return dims
