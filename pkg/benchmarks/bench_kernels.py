"""Time the numba kernels against the pure-numpy ones on the same inputs.

    python benchmarks/bench_kernels.py [--rows 15000] [--features 55] [--repeat 5]

Both backends are imported directly, so the environment flag does not matter
here. Outputs are also checked for agreement.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from horizon_cascade.kernels import jit, vectorized


def _best_of(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=15000)
    parser.add_argument("--features", type=int, default=55)
    parser.add_argument("--depth", type=int, default=4)
    parser.add_argument("--trees", type=int, default=50, help="trees in the ensemble_sum case")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    n, f = args.rows, args.features
    X = np.round(rng.normal(size=(n, f)), 2)
    y = (X[:, 0] + rng.normal(size=n) > 1.5).astype(np.float64)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))
    sorted_x = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
    scratch_o = np.empty((2, f, n), dtype=np.int32)
    scratch_x = np.empty((2, f, n))
    p = np.full(n, 0.5)
    grad, hess = p - y, p * (1 - p)
    series = np.cumsum(rng.normal(size=n))

    def tree(mod):
        return mod.grow_tree(X, order, sorted_x, grad, hess, args.depth, 1.0, 0.0, 1.0, scratch_o, scratch_x)

    # a small ensemble for prediction timing
    trees = [tree(jit)]
    for k in range(1, args.trees):
        g = grad * (1.0 + 0.01 * k)
        trees.append(jit.grow_tree(X, order, sorted_x, g, hess, args.depth, 1.0, 0.0, 1.0, scratch_o, scratch_x))
    offsets = np.cumsum([0] + [len(t[0]) for t in trees]).astype(np.int64)
    packed = [np.concatenate([t[i] for t in trees]) for i in range(5)]

    cases = {
        "rolling_moments": (lambda m: m.rolling_moments(series, 6)),
        "grow_tree": tree,
        "ensemble_sum": (lambda m: m.ensemble_sum(X, *packed, offsets)),
    }
    print(f"rows={n} features={f} depth={args.depth} trees={args.trees} (best of {args.repeat})")
    print(f"{'kernel':<16} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}  agree")
    for name, call in cases.items():
        a, b = call(jit), call(vectorized)  # also compiles the numba path
        if isinstance(a, tuple):
            agree = all(np.array_equal(u, v) for u, v in zip(a, b))
        else:
            agree = bool(np.allclose(a, b, rtol=1e-12, atol=1e-12))
        t_jit = _best_of(lambda: call(jit), args.repeat)
        t_np = _best_of(lambda: call(vectorized), args.repeat)
        print(f"{name:<16} {t_jit * 1e3:>10.2f} {t_np * 1e3:>10.2f} {t_np / t_jit:>7.1f}x  {agree}")


if __name__ == "__main__":
    main()
