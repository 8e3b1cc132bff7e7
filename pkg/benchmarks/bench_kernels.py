"""Time the compiled and numpy time-tag kernels on the same synthetic stream.

Usage::

    python3 benchmarks/bench_kernels.py [--rate 1e6] [--duration 1.0] [--repeat 3]
"""
import argparse
import time

import numpy as np

from lnspdc import kernels
from lnspdc.tags import SourceConfig, simulate_tags


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rate", type=float, default=1e6, help="pair rate (1/s)")
    ap.add_argument("--duration", type=float, default=1.0, help="stream length (s)")
    ap.add_argument("--bin-ps", type=int, default=100)
    ap.add_argument("--span-ps", type=int, default=200_000)
    ap.add_argument("--window-ps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cfg = SourceConfig(args.rate, args.duration, 0.5, 0.5, 1e3, 1e3, 50, "idler", seed=1)
    s = simulate_tags(cfg)
    ts, t1, t2 = (s.times(c) for c in (0, 1, 2))
    half = args.span_ps // (2 * args.bin_ps)
    print(f"stream: {len(s)} tags, signal {ts.size}, idlers {t1.size}/{t2.size}")
    print(f"default backend: {kernels.BACKEND}")

    ref = {}
    for name, mod in sorted(kernels.available_backends().items()):
        th, h = best_of(lambda: np.asarray(mod.pair_histogram(ts, t1, args.bin_ps, half)),
                        args.repeat)
        tw, w = best_of(lambda: np.asarray(mod.window_hits(ts, t1, args.window_ps), bool),
                        args.repeat)
        same = "" if not ref else (
            "  identical" if np.array_equal(h, ref["h"]) and np.array_equal(w, ref["w"])
            else "  MISMATCH")
        ref = ref or {"h": h, "w": w}
        print(f"{name:>7}: pair_histogram {th * 1e3:9.1f} ms   window_hits {tw * 1e3:8.1f} ms{same}")


if __name__ == "__main__":
    main()
