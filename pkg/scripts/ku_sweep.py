#!/usr/bin/env python3
"""Cost traces for several unbound-location counts at fixed k.

Writes one row per (m, k_u, seed, iteration) to a CSV suitable for plotting
mean cost against iteration.

    python scripts/ku_sweep.py --m 100 --k 100 --ku 10 50 100 --seeds 10
"""
import argparse
from pathlib import Path

import numpy as np

from common import instance, sa, trace, write_rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, nargs="+", default=[100])
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--ku", type=int, nargs="+", default=[10, 50, 100])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--strategy", choices=["random", "worst"], default="random")
    p.add_argument("--reads", type=int, default=20)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("-o", "--out", type=Path, default=Path("results/ku_sweep.csv"))
    args = p.parse_args()

    rows = []
    for m in args.m:
        for ku in args.ku:
            finals = []
            for seed in range(args.seeds):
                F, D, legal = instance(m, seed)
                costs, secs = trace(
                    F, D, legal, k=min(args.k, m), k_u=ku, index_strategy=args.strategy,
                    max_outer_iters=args.iters, solver=sa(args.reads, args.sweeps), seed=seed,
                )
                rows += [[m, ku, seed, it, c] for it, c in enumerate(costs)]
                finals.append(costs[-1])
                print(f"m={m} k_u={ku} seed={seed}: {costs[0]:.0f} -> {costs[-1]:.0f} in {secs:.1f} s")
            print(f"m={m} k_u={ku}: mean final {np.mean(finals):.1f}")
    write_rows(args.out, ["m", "k_u", "seed", "iter", "cost"], rows)


if __name__ == "__main__":
    main()
