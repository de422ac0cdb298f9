"""Grid COD of least-squares-CV KDE fits for the reference families.

    python scripts/run_kde_quality.py --sizes 200 2000 --seeds 10
"""

import argparse
import time

import numpy as np

from densiscore.families import FAMILIES, kde_quality


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", nargs="+", type=int, default=[200, 2000])
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--method", default="cv_ls", choices=["scott", "silverman", "cv_ml", "cv_ls"])
    parser.add_argument("--efficient", action="store_true")
    args = parser.parse_args()

    print(f"{'family':>18} {'n':>6} {'min':>7} {'median':>7} {'>=0.9':>6} {'s/fit':>7}")
    for family in FAMILIES:
        for n in args.sizes:
            t0 = time.perf_counter()
            cods = [kde_quality(family, n, s, args.method, args.efficient) for s in range(args.seeds)]
            per_fit = (time.perf_counter() - t0) / args.seeds
            hits = sum(c >= 0.9 for c in cods)
            print(f"{family:>18} {n:>6} {min(cods):7.4f} {np.median(cods):7.4f} "
                  f"{hits:>3}/{args.seeds:<2} {per_fit:7.3f}")


if __name__ == "__main__":
    main()
