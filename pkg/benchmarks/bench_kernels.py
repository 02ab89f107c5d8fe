"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
timed on identical inputs for both backends; the results are also checked to
agree so the comparison is between equivalent computations.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from jacobispec.kernels import RESCALE, get_backend


def _cases(rng):
    L = 100_000
    c = rng.uniform(0.7, 1.3, L)
    d = rng.uniform(-1.0, 1.0, L)
    cf_a = rng.uniform(0.7, 1.3, 4096)
    cf_b = rng.uniform(-1.0, 1.0, 4096)
    n = 2001
    off = rng.uniform(0.7, 1.3, n - 1)
    diag = rng.uniform(-1.0, 1.0, n) - (0.3 + 0.2j)
    rhs = np.zeros((n, 2), dtype=complex)
    rhs[n // 2, 0] = rhs[n // 2 + 1, 1] = 1.0
    return {
        "propagate (L=1e5)": lambda k: k.propagate(c, d, 0.3, 0.0, 1.0, RESCALE),
        "cf_backward (depth 4096)": lambda k: k.cf_backward(cf_a, cf_b, 0.3 + 0.1j, 0.5j),
        "tridiag_solve (n=2001, 2 rhs)": lambda k: k.tridiag_solve(off, diag, rhs),
    }


def _same(x, y):
    if isinstance(x, tuple):
        return all(_same(a, b) for a, b in zip(x, y))
    return np.allclose(x, y, rtol=1e-12, atol=0)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    py = get_backend("python")
    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled extension not built; only the fallback is available")
        return
    print(f"{'kernel':32s} {'cython [ms]':>12s} {'python [ms]':>12s} {'speedup':>8s}  agree")
    for name, call in _cases(np.random.default_rng(0)).items():
        t_cy = min(timeit.repeat(lambda: call(cy), number=1, repeat=args.repeat))
        t_py = min(timeit.repeat(lambda: call(py), number=1, repeat=max(1, args.repeat // 2)))
        agree = _same(call(cy), call(py))
        print(f"{name:32s} {1e3 * t_cy:12.3f} {1e3 * t_py:12.3f} {t_py / t_cy:8.1f}  {agree}")


if __name__ == "__main__":
    main()
