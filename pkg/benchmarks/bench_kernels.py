"""Timing comparison of the compiled and pure-numpy reduction cores.

Run as a script:

    python3 benchmarks/bench_kernels.py [n ...]

Times kernel evaluation, central moments, and the pairwise sum on
standard-normal data at each size (default 1e6 and 1e7) for both
backends and prints the speedup. Both implementations are imported
directly, so the result does not depend on which backend the package
selected at import time.
"""

import sys
import time

import numpy as np

from stvmeter.kernels import _ref

try:
    from stvmeter.kernels import _fast
except ImportError:
    _fast = None

REPEATS = 5


def best_of(fn, *args):
    best = float("inf")
    for _ in range(REPEATS):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench(n: int) -> None:
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)

    cases = [
        ("kernel_values", lambda impl: impl.kernel_values(x, theta, 0.3, 0.88)),
        ("central_moments", lambda impl: impl.central_moments(x)),
        ("pairwise_sum", lambda impl: impl.pairwise_sum(x)),
    ]
    print(f"n = {n:.0e}")
    for name, call in cases:
        t_ref = best_of(call, _ref)
        if _fast is None:
            print(f"  {name:16s} ref {t_ref * 1e3:8.2f} ms   (no compiled backend)")
            continue
        t_fast = best_of(call, _fast)
        print(
            f"  {name:16s} ref {t_ref * 1e3:8.2f} ms   "
            f"fast {t_fast * 1e3:8.2f} ms   x{t_ref / t_fast:5.2f}"
        )


def main(argv) -> int:
    sizes = [int(float(a)) for a in argv] or [1_000_000, 10_000_000]
    for n in sizes:
        bench(n)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
