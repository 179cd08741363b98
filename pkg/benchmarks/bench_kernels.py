"""Compare the compiled conv kernels against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from bagselect import kernels


def time_fn(fn, *args, repeat=20):
    fn(*args)                      # warm-up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    cases = [
        ("conv1 32x32x1 -> 6", (8, 1, 32, 32), (6, 1, 5, 5)),
        ("conv2 14x14x6 -> 16", (8, 6, 14, 14), (16, 6, 5, 5)),
        ("batch64 conv1", (64, 1, 32, 32), (6, 1, 5, 5)),
    ]
    backends = {}
    for name in ("numpy", "cython"):
        try:
            backends[name] = kernels.get_backend(name)
        except (ImportError, ValueError):
            print(f"backend {name!r} unavailable, skipping")
    print(f"{'case':24s}" + "".join(f"{n:>12s}" for n in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for label, xshape, wshape in cases:
        x = rng.normal(size=xshape)
        w = rng.normal(size=wshape)
        times = {}
        for name, be in backends.items():
            times[name] = time_fn(be.conv2d_forward, x, w)
        row = f"{label:24s}" + "".join(f"{times[n]*1e3:10.3f}ms" for n in times)
        if len(times) == 2:
            row += f"{times['numpy'] / times['cython']:11.2f}x"
        print(row)
        outs = [be.conv2d_forward(x, w) for be in backends.values()]
        if len(outs) == 2:
            assert np.allclose(outs[0], outs[1], atol=1e-10), label


if __name__ == "__main__":
    main()
