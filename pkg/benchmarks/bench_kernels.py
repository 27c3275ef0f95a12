"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --repeat 5

Each row reports the best wall time over ``--repeat`` runs and checks that
both backends return identical arrays.
"""
import argparse
import time

import numpy as np

from groundeval import kernels


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def cases(rng):
    for n in (100, 300, 500):
        cost = -rng.random((n, n))
        yield f"hungarian n={n}", lambda c=cost: kernels.hungarian(c)
    for n in (100, 1000):
        lo = rng.uniform(0, 10, (n, 3))
        hi = lo + rng.uniform(0.1, 2, (n, 3))
        yield f"pairwise_iou {n}x{n}", lambda lo=lo, hi=hi: kernels.pairwise_iou(lo, hi, lo, hi)
    for n, size in ((10_000, 224), (50_000, 224)):
        u, v = rng.uniform(0, size, n), rng.uniform(0, size, n)
        depth, radius = rng.uniform(0.5, 2, n), rng.uniform(1, 6, n)
        visible = np.ones(n, dtype=np.uint8)
        yield (f"splat {n} pts {size}px",
               lambda a=(u, v, depth, radius, visible, size, size): kernels.splat(*a))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0],
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--repeat", type=int, default=3, help="runs per case")
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    args = parser.parse_args()

    names = sorted(kernels.BACKENDS)
    if "compiled" not in names:
        print("compiled extension not built; only the python backend is timed")
    previous = kernels.backend()
    print(f"{'case':<26}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for label, fn in cases(np.random.default_rng(args.seed)):
        times, outputs = {}, {}
        for name in names:
            kernels.use_backend(name)
            times[name], outputs[name] = best_time(fn, args.repeat)
        flat = [o if isinstance(o, tuple) else (o,) for o in outputs.values()]
        same = all(np.array_equal(a, b) for other in flat[1:] for a, b in zip(flat[0], other))
        speedup = f"{times['python'] / times['compiled']:.1f}x" if "compiled" in times else "-"
        row = f"{label:<26}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names) + f"{speedup:>10}"
        print(row + ("" if same else "  MISMATCH"))
    kernels.use_backend(previous)


if __name__ == "__main__":
    main()
