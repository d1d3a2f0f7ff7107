#!/usr/bin/env python3
"""Final costs of the annealing backend against exact inner solves.

The cycle-selection QUBO has k_u + (k - k_u) // 2 variables, so k and k_u
must keep it within the exhaustive limit (24).

    python scripts/solver_parity.py --k 14 --ku 6 --seeds 10
"""
import argparse
from pathlib import Path

import numpy as np

from common import instance, sa, trace, write_rows
from qplace.cycles import num_cycles
from qplace.solvers import SolverConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--k", type=int, default=14)
    p.add_argument("--ku", type=int, default=6)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--reads", type=int, default=20)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("-o", "--out", type=Path, default=Path("results/solver_parity.csv"))
    args = p.parse_args()
    if num_cycles(args.k, args.ku) > 24:
        p.error("cycle-selection QUBO would exceed the exhaustive limit")

    backends = {"sa": sa(args.reads, args.sweeps), "exhaustive": SolverConfig(backend="exhaustive")}
    rows, finals = [], {b: [] for b in backends}
    for seed in range(args.seeds):
        F, D, legal = instance(args.m, seed)
        for name, solver in backends.items():
            costs, secs = trace(F, D, legal, k=args.k, k_u=args.ku, max_outer_iters=args.iters, solver=solver, seed=seed)
            finals[name].append(costs[-1])
            rows.append([name, seed, costs[0], costs[-1], round(secs, 2)])
            print(f"seed={seed} {name}: {costs[-1]:.0f} in {secs:.1f} s")
    sa_mean, ex_mean = np.mean(finals["sa"]), np.mean(finals["exhaustive"])
    print(f"mean final: sa {sa_mean:.1f}, exhaustive {ex_mean:.1f}, rel diff {abs(sa_mean - ex_mean) / ex_mean:.2%}")
    write_rows(args.out, ["backend", "seed", "initial", "final", "seconds"], rows)


if __name__ == "__main__":
    main()
