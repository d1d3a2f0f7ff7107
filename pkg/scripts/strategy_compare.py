#!/usr/bin/env python3
"""Random versus worst-cost facility selection on the same instances.

    python scripts/strategy_compare.py --m 200 --k 100 --ku 50 --seeds 10
"""
import argparse
from pathlib import Path

import numpy as np

from common import instance, sa, trace, write_rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--ku", type=int, default=50)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--reads", type=int, default=20)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("-o", "--out", type=Path, default=Path("results/strategy_compare.csv"))
    args = p.parse_args()

    rows = []
    finals = {"random": [], "worst": []}
    for seed in range(args.seeds):
        F, D, legal = instance(args.m, seed)
        for strategy in finals:
            costs, secs = trace(
                F, D, legal, k=args.k, k_u=args.ku, index_strategy=strategy,
                max_outer_iters=args.iters, solver=sa(args.reads, args.sweeps), seed=seed,
            )
            rows += [[strategy, seed, it, c] for it, c in enumerate(costs)]
            finals[strategy].append(costs[-1])
            print(f"seed={seed} {strategy}: {costs[0]:.0f} -> {costs[-1]:.0f} in {secs:.1f} s")
    for strategy, vals in finals.items():
        print(f"{strategy}: mean final {np.mean(vals):.1f} (sd {np.std(vals):.1f})")
    write_rows(args.out, ["strategy", "seed", "iter", "cost"], rows)


if __name__ == "__main__":
    main()
