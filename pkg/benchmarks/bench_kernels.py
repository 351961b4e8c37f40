"""Compare the compiled and numpy convolution backends.

Run: python3 benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from langground.nn import kernels, kernels_numpy

SHAPES = [
    (32, 32, 5, 16),
    (32, 32, 16, 16),
    (64, 64, 16, 16),
]
REPS = 50


def _time(fn, *args) -> float:
    fn(*args)  # warm-up
    t0 = time.perf_counter()
    for _ in range(REPS):
        fn(*args)
    return (time.perf_counter() - t0) / REPS * 1e3


def main() -> None:
    if kernels.BACKEND == "numpy":
        print("compiled extension not available; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'shape':>22} {'dir':>8} {'numpy ms':>9} {'cython ms':>10} {'speedup':>8}")
    for h, w, cin, cout in SHAPES:
        x = rng.normal(size=(h, w, cin))
        wt = rng.normal(size=(3, 3, cin, cout))
        b = rng.normal(size=cout)
        gy = rng.normal(size=(h, w, cout))
        pairs = [
            ("forward", lambda m: m.conv3x3(x, wt, b, 1)),
            ("backward", lambda m: m.conv3x3_backward(x, wt, gy, 1)),
        ]
        for name, call in pairs:
            tn = _time(call, kernels_numpy)
            tc = _time(call, kernels)
            print(
                f"{h}x{w}x{cin}->{cout:>3} {name:>8} {tn:9.3f} {tc:10.3f} {tn / tc:7.2f}x"
            )


if __name__ == "__main__":
    main()
