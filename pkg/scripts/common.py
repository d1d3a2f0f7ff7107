"""Shared helpers for the experiment scripts."""
import csv
import time
from pathlib import Path

import numpy as np

from qplace.expansion import ExpansionConfig, run
from qplace.fpga import LegalityOracle, build_distance_matrix, build_flow_matrix, fictional_arch, generate_instance
from qplace.solvers import SolverConfig


def instance(m: int, seed: int, arch=None):
    arch = arch or fictional_arch()
    nl = generate_instance(arch, m, np.random.default_rng(seed))
    return build_flow_matrix(nl), build_distance_matrix(arch), LegalityOracle.from_netlist(arch, nl)


def trace(F, D, legal, **cfg) -> tuple[list[float], float]:
    """Per-iteration costs and wall time in seconds."""
    t0 = time.perf_counter()
    _, recs = run(F, D, legal, ExpansionConfig(**cfg))
    return [r.qap_cost for r in recs], time.perf_counter() - t0


def sa(reads: int, sweeps: int) -> SolverConfig:
    return SolverConfig(num_reads=reads, sa_sweeps=sweeps)


def write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")
