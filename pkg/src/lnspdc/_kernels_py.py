"""Pure-numpy versions of the time-tag kernels.

Both functions expect sorted ``int64`` timestamp arrays.
"""
import numpy as np

_CHUNK_PAIRS = 1 << 22


def pair_histogram(ta, tb, bin_ps, half_bins):
    """Counts of ``tb - ta`` in ``2*half_bins + 1`` bins centred on multiples of ``bin_ps``."""
    ta = np.ascontiguousarray(ta, dtype=np.int64)
    tb = np.ascontiguousarray(tb, dtype=np.int64)
    bin_ps = int(bin_ps)
    H = (2 * int(half_bins) + 1) * bin_ps
    out = np.zeros(2 * half_bins + 1, dtype=np.int64)
    if ta.size == 0 or tb.size == 0:
        return out
    lo = np.searchsorted(tb, ta - (H // 2), side="left")
    hi = np.searchsorted(tb, ta + (H - 1) // 2, side="right")
    counts = hi - lo
    ends = np.cumsum(counts)
    start = 0
    while start < ta.size:
        # chunk so the expanded pair list stays bounded
        base = ends[start - 1] if start else 0
        stop = int(np.searchsorted(ends, base + _CHUNK_PAIRS, side="right"))
        stop = max(stop, start + 1)
        c = counts[start:stop]
        m = int(c.sum())
        if m:
            rep = np.repeat(np.arange(start, stop), c)
            offs = np.arange(m) - np.repeat(np.cumsum(c) - c, c)
            dt = tb[lo[rep] + offs] - ta[rep]
            out += np.bincount((2 * dt + H) // (2 * bin_ps), minlength=out.size)
        start = stop
    return out


def window_hits(ts, tx, window_ps):
    """True where some ``tx`` lies within ``[t - window_ps, t + window_ps]``."""
    ts = np.ascontiguousarray(ts, dtype=np.int64)
    tx = np.ascontiguousarray(tx, dtype=np.int64)
    lo = np.searchsorted(tx, ts - window_ps, side="left")
    hi = np.searchsorted(tx, ts + window_ps, side="right")
    return hi > lo
