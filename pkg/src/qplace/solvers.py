"""QUBO solver backends: exact enumeration, simulated annealing and a
subprocess bridge for external (hardware) samplers.

Every backend also scores the all-zero vector, so the returned objective is
never above the problem offset.
"""
from __future__ import annotations

import json
import math
import shlex
import subprocess
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._kernels import anneal, gray_enumerate
from .qubo import QuboProblem

EXHAUSTIVE_MAX_DIM = 24


class SolverError(RuntimeError):
    pass


class ExternalSolverError(SolverError):
    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message if not stderr else f"{message}\n--- stderr ---\n{stderr}")
        self.stderr = stderr


class Backend(str, Enum):
    EXHAUSTIVE = "exhaustive"
    SIMULATED_ANNEALING = "simulated_annealing"
    EXTERNAL = "external"


@dataclass
class SolverConfig:
    backend: Backend = Backend.SIMULATED_ANNEALING
    num_reads: int = 100
    sa_sweeps: int = 1000
    sa_beta_range: tuple[float, float] | None = None
    seed: int = 0
    external_cmd: str | None = None
    time_limit_ms: int | None = None
    exhaustive_max_dim: int = EXHAUSTIVE_MAX_DIM

    def __post_init__(self):
        self.backend = Backend(self.backend)
        if self.num_reads < 1 or self.sa_sweeps < 1:
            raise ValueError("num_reads and sa_sweeps must be positive")
        if self.sa_beta_range is not None:
            lo, hi = self.sa_beta_range
            if not (lo > 0 and hi > 0):
                raise ValueError("beta range must be positive")
            self.sa_beta_range = (float(lo), float(hi))
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.time_limit_ms is not None and self.time_limit_ms <= 0:
            raise ValueError("time_limit_ms must be positive")
        if self.backend is Backend.EXTERNAL and not self.external_cmd:
            raise ValueError("external backend needs external_cmd")


@dataclass(eq=False)
class SolveResult:
    best_x: np.ndarray
    best_objective: float
    reads_used: int
    wall_time_ms: int = 0

    def __eq__(self, other) -> bool:
        # timing is not part of the result
        if not isinstance(other, SolveResult):
            return NotImplemented
        return (
            np.array_equal(self.best_x, other.best_x)
            and self.best_objective == other.best_objective
            and self.reads_used == other.reads_used
        )


def _pick_best(problem: QuboProblem, candidates: np.ndarray) -> tuple[np.ndarray, float]:
    """Lowest objective; ties go to the lexicographically smallest vector."""
    X = candidates.astype(np.float64)
    energies = np.einsum("ri,ij,rj->r", X, problem.q, X)
    lowest = energies.min()
    tied = candidates[energies == lowest]
    order = np.lexsort(tied.T[::-1])
    return tied[order[0]].astype(np.int8), float(lowest) + problem.offset


def solve_exhaustive(problem: QuboProblem, max_dim: int = EXHAUSTIVE_MAX_DIM) -> SolveResult:
    """Exact minimum by Gray-code enumeration with incremental energies."""
    start = time.perf_counter()
    d = problem.dim
    if d > max_dim:
        raise SolverError(f"exhaustive search limited to dim <= {max_dim}, got {d}")
    if d == 0:
        return SolveResult(np.zeros(0, dtype=np.int8), problem.offset, 1, 0)
    code = int(gray_enumerate(np.ascontiguousarray(problem.q)))
    x = np.array([(code >> (d - 1 - i)) & 1 for i in range(d)], dtype=np.int8)
    ms = int((time.perf_counter() - start) * 1000)
    return SolveResult(x, problem.objective(x), 1, ms)


def auto_beta_range(q: np.ndarray) -> tuple[float, float]:
    """Hot/cold inverse temperatures from single-flip energy changes at x = 0.

    ``ln 2 / max|dE|`` accepts the largest uphill move half the time;
    ``ln 100 / min|dE|`` makes the smallest one 1% likely.
    """
    deltas = np.abs(np.diag(q))
    deltas = deltas[deltas > 0]
    if deltas.size == 0:
        # zero diagonal: fall back to pairwise couplings
        deltas = np.abs(2 * q[np.triu_indices_from(q, k=1)])
        deltas = deltas[deltas > 0]
    if deltas.size == 0:
        return 1.0, 1.0
    return math.log(2) / deltas.max(), math.log(100) / deltas.min()


def read_seeds(seed: int, num_reads: int) -> np.ndarray:
    """Independent per-read seeds derived from ``(seed, read index)``."""
    ss = np.random.SeedSequence(seed)
    return np.array([int(c.generate_state(1, np.uint32)[0]) for c in ss.spawn(num_reads)], dtype=np.int64)


def solve_sa(problem: QuboProblem, cfg: SolverConfig) -> SolveResult:
    start = time.perf_counter()
    d = problem.dim
    if d == 0:
        return SolveResult(np.zeros(0, dtype=np.int8), problem.offset, 0, 0)
    q = np.ascontiguousarray(problem.q)
    lo, hi = cfg.sa_beta_range or auto_beta_range(q)
    betas = np.geomspace(lo, hi, cfg.sa_sweeps)
    samples = anneal(q, betas, read_seeds(cfg.seed, cfg.num_reads))
    candidates = np.vstack([np.zeros((1, d), dtype=np.int8), samples])
    x, obj = _pick_best(problem, candidates)
    ms = int((time.perf_counter() - start) * 1000)
    return SolveResult(x, obj, cfg.num_reads, ms)


def solve_external(problem: QuboProblem, cfg: SolverConfig) -> SolveResult:
    """Pipe the QUBO exchange JSON to ``cfg.external_cmd`` and verify its answer."""
    if not cfg.external_cmd:
        raise SolverError("external backend needs external_cmd")
    start = time.perf_counter()
    timeout = cfg.time_limit_ms / 1000 if cfg.time_limit_ms else None
    try:
        proc = subprocess.run(
            shlex.split(cfg.external_cmd),
            input=json.dumps(problem.to_json()),
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired as exc:
        raise ExternalSolverError(f"external solver exceeded {cfg.time_limit_ms} ms") from exc
    except OSError as exc:
        raise ExternalSolverError(f"could not start external solver: {exc}") from exc
    if proc.returncode != 0:
        raise ExternalSolverError(f"external solver exited with status {proc.returncode}", proc.stderr)
    try:
        doc = json.loads(proc.stdout)
        x = np.array(doc["x"], dtype=np.int64)
        claimed = float(doc["objective"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ExternalSolverError(f"malformed external solver output: {exc}", proc.stderr) from exc
    if x.shape != (problem.dim,) or not np.isin(x, (0, 1)).all():
        raise ExternalSolverError(f"external solver returned a non-binary or wrong-length x (dim {problem.dim})")
    actual = problem.objective(x)
    if abs(actual - claimed) > 1e-6 * max(1.0, abs(actual)):
        raise ExternalSolverError(f"objective mismatch: solver claimed {claimed}, recomputed {actual}")
    candidates = np.vstack([np.zeros((1, problem.dim), dtype=np.int8), x.astype(np.int8)[None, :]])
    best_x, best = _pick_best(problem, candidates)
    ms = int((time.perf_counter() - start) * 1000)
    return SolveResult(best_x, best, int(doc.get("reads", 1)), ms)


def solve(problem: QuboProblem, cfg: SolverConfig) -> SolveResult:
    if cfg.backend is Backend.EXHAUSTIVE:
        return solve_exhaustive(problem, cfg.exhaustive_max_dim)
    if cfg.backend is Backend.SIMULATED_ANNEALING:
        return solve_sa(problem, cfg)
    return solve_external(problem, cfg)
