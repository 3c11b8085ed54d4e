"""Time the numba kernels against the numpy reference kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each case is run once per backend before timing so that JIT compilation is
excluded, and the outputs of the two backends are checked to be identical.
"""
import argparse
import json
import timeit

import numpy as np

from ultrabrown.kernels import STREAM_WEIGHT, numba_backend, numpy_backend


def cases():
    paths = np.arange(2000, dtype=np.int64)
    pts = np.arange(64, dtype=np.int64).reshape(-1, 1)
    return {
        "tree_sums (2,2,1) level 5, 2000 paths": lambda b: b.tree_sums(
            7, STREAM_WEIGHT, paths, 2, 2, 1, 5, 6, True),
        "tree_sums (2,1,1) level 6, 2000 paths, carry-free": lambda b: b.tree_sums(
            7, STREAM_WEIGHT, paths, 2, 1, 1, 6, 7, False),
        "tree_sums (3,1,2) level 5, 2000 paths": lambda b: b.tree_sums(
            7, STREAM_WEIGHT, paths, 3, 1, 2, 5, 6, True),
        "eval_points (2,1,1) depth 20, 64 points": lambda b: b.eval_points(
            7, STREAM_WEIGHT, paths, 2, 1, 1, 20, 21, True, pts),
        "candidate_walk (2,2,1) m=6, 2000 paths": lambda b: b.candidate_walk(
            7, STREAM_WEIGHT, paths, 2, 2, 1, 6, True),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()
    if numba_backend is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rows = []
    for name, fn in cases().items():
        ref, fast = fn(numpy_backend), fn(numba_backend)
        if not _same(ref, fast):
            raise SystemExit(f"backends disagree on {name}")
        t_np = min(timeit.repeat(lambda: fn(numpy_backend), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: fn(numba_backend), number=1, repeat=args.repeat))
        rows.append({"case": name, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})
        print(f"{name:55s} numpy {t_np * 1e3:9.2f} ms   numba {t_nb * 1e3:9.2f} ms   "
              f"x{t_np / t_nb:6.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
