"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times exhaustive fitted norms over all subsets and an MCMC chain on the
same inputs for both backends, checks that the outputs agree and prints
the speedup.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from blockl0._kernels import _pykernel

try:
    from blockl0._kernels import _ckernel
except ImportError:
    _ckernel = None


def problem(n, p, seed=0):
    rng = np.random.default_rng(seed)
    X = np.sqrt(0.5) * rng.standard_normal((n, p)) + np.sqrt(0.5) * rng.standard_normal((n, 1))
    beta = np.zeros(p)
    beta[: max(1, p // 5)] = 1.0
    y = X @ beta + rng.standard_normal(n)
    return np.ascontiguousarray(X.T @ X), np.ascontiguousarray(X.T @ y)


def cases():
    G, b = problem(200, 12)
    masks = np.arange(2**12, dtype=np.uint64)
    yield "fitted_norms p=12 (4096 subsets)", "fitted_norms", (G, b, masks, 0.0)

    for p, iters in ((50, 20_000), (400, 20_000)):
        G, b = problem(2 * p, p, seed=p)
        blocks = (np.arange(p) >= p // 2).astype(np.int64)
        u = np.random.default_rng(1).random((iters, 4))
        args = (G, b, blocks, np.array([3.0, 4.0]), np.zeros(p + 1),
                np.zeros(p, dtype=np.uint8), u, 0.5, 0.0, p)
        yield f"mcmc_chain p={p} ({iters} iterations)", "mcmc_chain", args


def agree(name, a, c):
    if name == "fitted_norms":
        return bool(np.allclose(a, c, rtol=1e-10, atol=1e-10, equal_nan=True))
    return all(np.array_equal(np.asarray(a[k]), np.asarray(c[k])) for k in (0, 1, 3))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)
    if _ckernel is None:
        print("compiled kernel not built; only the Python backend is available", file=sys.stderr)

    rows = []
    print(f"{'case':40s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s} agree")
    for label, fn, fargs in cases():
        py = getattr(_pykernel, fn)
        t_py = min(timeit.repeat(lambda: py(*fargs), number=1, repeat=args.repeat))
        row = {"case": label, "python_s": t_py}
        if _ckernel is not None:
            cy = getattr(_ckernel, fn)
            t_cy = min(timeit.repeat(lambda: cy(*fargs), number=1, repeat=args.repeat))
            row.update(cython_s=t_cy, speedup=t_py / t_cy, agree=agree(fn, py(*fargs), cy(*fargs)))
            print(f"{label:40s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:7.1f}x {row['agree']}")
        else:
            print(f"{label:40s} {t_py:10.4f} {'-':>10s} {'-':>8s} -")
        rows.append(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
