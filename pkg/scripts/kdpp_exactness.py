"""Total-variation distance between sampled and exact k-DPP distributions as draws grow.

    python scripts/kdpp_exactness.py --bands 6 --k 3 --max-draws 200000
"""

import argparse
import time

import numpy as np

from bandgroup.kdpp import KdppSampler, exact_kdpp_pmf, total_variation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bands", type=int, default=6)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--kernels", type=int, default=3)
    ap.add_argument("--max-draws", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    checkpoints = [n for n in (1_000, 10_000, 50_000, 100_000, 200_000, 500_000) if n <= args.max_draws]
    print(f"{'kernel':>6} {'draws':>8} {'TV':>8} {'secs':>6}")
    for idx in range(args.kernels):
        a = rng.standard_normal((args.bands, args.bands))
        L = a @ a.T
        pmf = exact_kdpp_pmf(L, args.k)
        sampler = KdppSampler(L, args.k)
        for n in checkpoints:
            t0 = time.perf_counter()
            counts = sampler.draws(n, seed=args.seed + idx)
            print(f"{idx:>6} {n:>8} {total_variation(pmf, counts):>8.4f} {time.perf_counter() - t0:>6.1f}")


if __name__ == "__main__":
    main()
