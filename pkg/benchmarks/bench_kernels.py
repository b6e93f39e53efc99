"""Time the compiled kernels against the numpy fallback on mixture-sized inputs.

    python benchmarks/bench_kernels.py [--n 2000] [--K 20] [--S 300] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pseudodp.kernels import _fallback

try:
    from pseudodp.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(n, K, S, R, rng):
    X = np.column_stack([np.ones(n), rng.integers(0, 2, size=(n, R - 1))]).astype(float)
    y = rng.standard_normal(n)
    w = rng.uniform(size=n)
    z = rng.integers(0, K, size=n)
    beta = rng.standard_normal((K, R))
    logp = rng.standard_normal((n, K))
    u = rng.uniform(size=n)
    means = rng.standard_normal((n, K))
    log_pi = np.log(rng.dirichlet(np.ones(K)))
    sigma = rng.uniform(0.5, 2.0, size=K)
    L = rng.standard_normal((S, n))
    return {
        "colmax_abs": lambda k: k.colmax_abs(L),
        "sample_labels": lambda k: k.sample_labels(logp, u),
        "cluster_stats": lambda k: k.cluster_stats(X, y, w, z, K),
        "cluster_wrss": lambda k: k.cluster_wrss(X, y, w, z, beta),
        "mixture_logdens": lambda k: k.mixture_logdens(y, means, log_pi, sigma),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--K", type=int, default=20)
    p.add_argument("--S", type=int, default=300)
    p.add_argument("--R", type=int, default=36)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"n={args.n} K={args.K} S={args.S} R={args.R}")
    print(f"{'kernel':<18}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name, call in cases(args.n, args.K, args.S, args.R, rng).items():
        number = 20
        t_py = min(timeit.repeat(lambda: call(_fallback), number=number, repeat=args.repeat)) / number * 1e3
        if _ckernels is None:
            print(f"{name:<18}{t_py:>14.3f}{'n/a':>14}{'':>10}")
            continue
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:<18}{t_py:>14.3f}{t_c:>14.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
