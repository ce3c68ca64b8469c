"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from qbhop import kernels
from qbhop.objective import DomainGrid, double_well, egg_crate


def grover_case(n, rotations):
    rng = np.random.default_rng(0)
    mask = rng.random(n) < 16 / n
    amps = np.full(n, 1 / np.sqrt(n), dtype=complex)

    def run(backend):
        a = amps.copy()
        kernels.grover_iterate(a, mask, rotations, backend=backend)
        return a
    return f"grover N={n} r={rotations}", run


def descent_case(spec, points, steps, name):
    X = DomainGrid(spec.domain, (points,) * spec.dim).points()
    step = spec.default_step()

    def run(backend):
        return kernels.descend_gd(spec, X, None, step, steps, backend=backend)
    return f"descent {name} M={X.shape[0]} L={steps}", run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        kernels.get_backend("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return
    cases = [
        grover_case(1024, 25),
        grover_case(4096, 50),
        grover_case(65536, 200),
        descent_case(double_well(1), 4096, 30, "doublewell"),
        descent_case(egg_crate(16), 64, 40, "eggcrate"),
        descent_case(egg_crate(16), 256, 40, "eggcrate"),
    ]
    print(f"{'case':<36}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name, fn in cases:
        np.testing.assert_allclose(fn("compiled"), fn("python"), atol=1e-12)
        t = {}
        for backend in ("python", "compiled"):
            n = max(1, int(0.2 / max(timeit.timeit(lambda: fn(backend), number=1), 1e-6)))
            t[backend] = min(timeit.repeat(lambda: fn(backend), number=n, repeat=args.repeat)) / n * 1e3
        print(f"{name:<36}{t['python']:>12.3f}{t['compiled']:>14.3f}{t['python'] / t['compiled']:>9.1f}x")

    # end to end: the hopper comparison over B in {2, 4, 8, 16}, backend chosen at import
    cmd = [sys.executable, "-m", "qbhop.cli", "bench", "--trials", "100", "--out", os.devnull]
    t = {}
    for backend, flag in (("python", "1"), ("compiled", "0")):
        start = time.perf_counter()
        subprocess.run(cmd, env=dict(os.environ, QBHOP_PURE_PYTHON=flag), check=True)
        t[backend] = (time.perf_counter() - start) * 1e3
    name = "qbhop bench --trials 100"
    print(f"{name:<36}{t['python']:>12.0f}{t['compiled']:>14.0f}{t['python'] / t['compiled']:>9.1f}x")


if __name__ == "__main__":
    main()
