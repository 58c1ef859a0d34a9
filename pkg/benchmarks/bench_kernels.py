"""Compare the compiled and numpy scoring kernels.

    python benchmarks/bench_kernels.py [--members 219] [--families 48] [--repeat 5]

The defaults mirror the largest evaluation setting: a sample scored
against 48 families whose biggest holds a few hundred members.
"""
import argparse
import sys
import timeit

import numpy as np

from grdsim import kernels
from grdsim.detector import detect
from grdsim.family import train_family
from grdsim.grd import GrdMatrix, default_groups


def random_grd(rng, names, density=0.05):
    n = len(names)
    w = rng.integers(1, 11, size=(n, n)) * (rng.random((n, n)) < density)
    return GrdMatrix(w, names)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--members", type=int, default=219)
    ap.add_argument("--families", type=int, default=48)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    names = default_groups().group_names
    family = train_family("bench", [random_grd(rng, names) for _ in range(args.members)])
    sample = random_grd(rng, names)
    t = sample.weights.ravel()
    stack = family.weight_stack

    backends = kernels.available_backends()
    results = {}
    for name, impl in backends.items():
        number = 200
        best = min(
            timeit.repeat(lambda: kernels.pair_counts(t, stack, impl), number=number, repeat=args.repeat)
        )
        results[name] = best / number
        print(f"pair_counts[{name:>6}]  {args.members} members: {results[name] * 1e6:9.1f} us/call")

    ref = kernels.pair_counts(t, stack, backends["python"])
    for name, impl in backends.items():
        if not np.array_equal(kernels.pair_counts(t, stack, impl), ref):
            print(f"backend {name} disagrees with the numpy reference", file=sys.stderr)
            return 1
    if "cython" in results:
        print(f"speedup cython/python: {results['python'] / results['cython']:.1f}x")

    fams = [family] + [
        train_family(f"f{i:02d}", [random_grd(rng, names) for _ in range(20)])
        for i in range(args.families - 1)
    ]
    best = min(timeit.repeat(lambda: detect(sample, fams), number=5, repeat=args.repeat)) / 5
    print(f"detect vs {args.families} families (active backend {kernels.BACKEND}): {best * 1e3:.2f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
