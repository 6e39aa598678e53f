"""Throughput comparison of the numpy reference kernels against the compiled
extension. Run directly:

    python3 benchmarks/bench_kernels.py [--size 2048] [--repeat 5]
"""

import argparse
import time

import numpy as np

from scalestain import kernels
from scalestain.stains import get_profile


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=2048, help="plane side in pixels")
    ap.add_argument("--repeat", type=int, default=5, help="runs per measurement")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.size
    rgb = rng.integers(0, 256, (n, n, 3), np.uint8)
    plane = rng.integers(0, 256, (n, n), np.uint8)
    lut = get_profile("hematoxylin")._lut
    target = get_profile("hematoxylin").target_color
    mpix = n * n / 1e6

    backends = [("numpy", kernels.get_backend("numpy"))]
    try:
        backends.append(("cython", kernels.get_backend("cython")))
    except (ImportError, ValueError):
        print("compiled extension not available; benchmarking numpy only")

    cases = [
        ("avg_pool2 rgb", lambda k: k.avg_pool2(rgb)),
        ("avg_pool2 plane", lambda k: k.avg_pool2(plane)),
        ("max_pool2", lambda k: k.max_pool2(plane)),
        ("density_u8", lambda k: k.density_u8(rgb, lut)),
        ("blend_u8", lambda k: k.blend_u8(rgb, plane, target, 0.7)),
    ]

    print(f"plane {n}x{n} ({mpix:.1f} Mpix), best of {args.repeat}")
    header = f"{'kernel':<18}" + "".join(f"{name + ' Mpix/s':>16}" for name, _ in backends)
    print(header)
    print("-" * len(header))
    for label, call in cases:
        row = f"{label:<18}"
        for _, backend in backends:
            secs = _best(lambda: call(backend), args.repeat)
            row += f"{mpix / secs:>16.1f}"
        print(row)


if __name__ == "__main__":
    main()
