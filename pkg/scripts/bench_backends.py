#!/usr/bin/env python3
"""Benchmark the Cython kernel core against the pure-numpy fallback.

Usage: python3 scripts/bench_backends.py [--repeats N]

Times the hot kernels on shapes representative of the reduced-profile
training loop (the big early layers dominate) and a full-scale stem layer,
then prints a side-by-side table with speedups.
"""

import argparse
import time

import numpy as np

from seatnet.backend import pure

try:
    from seatnet.backend import _core
except ImportError:
    _core = None


def timeit(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_cases():
    rs = np.random.RandomState(0)

    def c(a):
        return np.ascontiguousarray(a)

    cases = []

    # im2col / col2im on a stride-2 3x3 stem at reduced and full scale
    for label, (b, ch, h, w) in [
        ("stem 32x3x224x224", (8, 3, 226, 226)),
        ("block 32x48x48x48", (32, 48, 50, 50)),
    ]:
        x = c(rs.randn(b, ch, h, w).astype(np.float32))
        oh, ow = (h - 3) // 2 + 1, (w - 3) // 2 + 1
        cols = c(rs.randn(b, ch * 9, oh * ow).astype(np.float32))
        cases.append((f"im2col {label}", lambda m, x=x, oh=oh, ow=ow:
                      m.im2col(x, 3, 3, 2, 2, oh, ow)))
        cases.append((f"col2im {label}", lambda m, cols=cols, b=b, ch=ch, h=h, w=w,
                      oh=oh, ow=ow:
                      m.col2im(cols, b, ch, h - 2, w - 2, 3, 3, 2, 2, 1, 1, oh, ow)))

    # depthwise 3x3 stride 1 on a mid block
    x = c(rs.randn(32, 48, 26, 26).astype(np.float32))
    k = c(rs.randn(48, 1, 3, 3).astype(np.float32))
    gy = c(rs.randn(32, 48, 24, 24).astype(np.float32))
    cases.append(("depthwise fwd 32x48x24x24",
                  lambda m: m.depthwise_forward(x, k, 1, 1, 24, 24)))
    cases.append(("depthwise bwd 32x48x24x24",
                  lambda m: m.depthwise_backward(x, k, gy, 1, 1, 1, 1, 24, 24)))

    # fused batch norm and relu backward on the biggest reduced activation
    xb = c(rs.randn(32, 48, 48, 48).astype(np.float32))
    gb = c(rs.randn(32, 48, 48, 48).astype(np.float32))
    gamma = c(rs.rand(48).astype(np.float32) + 0.5)
    beta = c(rs.randn(48).astype(np.float32))
    cases.append(("bn train fwd 32x48x48x48",
                  lambda m: m.bn_train_forward(xb, gamma, beta, 1e-3)))
    out = pure.bn_train_forward(xb, gamma, beta, 1e-3)
    xhat, inv_std = c(out[1]), c(out[2])
    cases.append(("bn train bwd 32x48x48x48",
                  lambda m: m.bn_train_backward(xhat, gamma, inv_std, gb)))
    cases.append(("relu6 bwd 32x48x48x48",
                  lambda m: m.relu6_backward(xb, gb)))

    # PRNG bulk fill (dropout masks)
    buf = np.empty(1 << 20)
    state = np.array([1, 2, 3, 4], dtype=np.uint64)
    cases.append(("rng fill 1M doubles",
                  lambda m: m.rng_fill(state.copy(), buf)))
    return cases


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _core is None:
        print("compiled extension not available; only the pure backend will run")
    header = f"{'kernel':34} {'pure (ms)':>10} {'cython (ms)':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, fn in bench_cases():
        t_pure = timeit(lambda: fn(pure), args.repeats) * 1e3
        if _core is not None:
            t_core = timeit(lambda: fn(_core), args.repeats) * 1e3
            print(f"{name:34} {t_pure:10.2f} {t_core:12.2f} {t_pure / t_core:7.1f}x")
        else:
            print(f"{name:34} {t_pure:10.2f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
