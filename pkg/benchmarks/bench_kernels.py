"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--series 200]
"""
import argparse
import timeit

import numpy as np

from wearpattern import kernels
from wearpattern.clustering import SomGrid
from wearpattern.distance import euclidean_matrix, znormalize


def cases(n_series, length, iterations):
    rng = np.random.default_rng(0)
    Z = znormalize(rng.normal(size=(n_series, length)))
    data = rng.uniform(size=(n_series, length))
    grid = SomGrid.for_users(n_series, iterations=iterations)
    start = data[rng.choice(n_series, grid.units)]
    order = rng.integers(0, n_series, iterations).astype(np.intp)
    D = euclidean_matrix(data)
    core = np.sort(D, axis=1)[:, 4]
    return {
        "sbd_pair": lambda impl: impl.sbd_matrix(Z[:1], Z[1:2]),
        "sbd_to_3": lambda impl: impl.sbd_matrix(Z, Z[:3]),
        "sbd_matrix": lambda impl: impl.sbd_matrix(Z, Z),
        "som_train": lambda impl: impl.som_train(start.copy(), data, order, grid.grid_sq_distances(),
                                                 0.5, grid.radius, grid.time_constant),
        "optics_order": lambda impl: impl.optics_order(D, core, np.inf),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--series", type=int, default=200)
    p.add_argument("--length", type=int, default=48)
    p.add_argument("--iterations", type=int, default=10_000, help="SOM training steps")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    impls = kernels.backends()
    print(f"backends: {', '.join(sorted(impls))}   selected: {kernels.BACKEND}")
    print(f"sbd dispatch: compiled up to {kernels.SBD_COMPILED_MAX_PAIRS} pairs, numpy above")
    print(f"{'kernel':<14}" + "".join(f"{name:>12}" for name in sorted(impls)) + f"{'speedup':>10}")
    for name, fn in cases(args.series, args.length, args.iterations).items():
        best = {b: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) for b, m in impls.items()}
        row = f"{name:<14}" + "".join(f"{best[b] * 1e3:>10.2f}ms" for b in sorted(impls))
        if "cython" in best:
            row += f"{best['python'] / best['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
