"""Cyclic expansion: improve a placement by repeatedly solving small
cycle-selection QUBOs over a chosen subset of facilities and free locations.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.csgraph import maximum_bipartite_matching

from .cycles import CycleSamplingError, apply_selection, num_cycles, sample_cycle_set
from .fpga import LegalityOracle
from .qap import SubPermutation, per_facility_cost, qap_cost
from .qubo import SubProblemIndex, build_alpha_qubo, build_subproblem_matrix
from .solvers import SolverConfig, solve

log = logging.getLogger(__name__)

ZERO_WEIGHT = 1e-9
CAP_FACTOR = 10


class IndexStrategy(str, Enum):
    RANDOM = "random"
    WORST = "worst"


class InnerMode(str, Enum):
    COVERAGE = "coverage"
    FIXED = "fixed"


class InfeasibleError(RuntimeError):
    pass


@dataclass
class ExpansionConfig:
    k: int
    k_u: int = 0
    index_strategy: IndexStrategy = IndexStrategy.RANDOM
    max_outer_iters: int = 50
    rel_improvement_eps: float = 0.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    inner_mode: InnerMode = InnerMode.COVERAGE
    # rounds per outer iteration when inner_mode is FIXED
    inner_rounds: int = 1
    build_subproblem: bool = False

    def __post_init__(self):
        self.index_strategy = IndexStrategy(self.index_strategy)
        self.inner_mode = InnerMode(self.inner_mode)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.k_u < 0 or self.k_u > self.k:
            raise ValueError("need 0 <= k_u <= k")
        if self.max_outer_iters < 1 or self.inner_rounds < 1:
            raise ValueError("iteration counts must be positive")
        if self.rel_improvement_eps < 0:
            raise ValueError("rel_improvement_eps must be nonnegative")


@dataclass
class IterationRecord:
    outer_iter: int
    qap_cost: float
    inner_rounds: int
    qubo_dim: int
    wall_time_ms: int
    cap_hit: bool = False


def init_random(
    m: int,
    n: int,
    legal: LegalityOracle,
    rng: np.random.Generator,
    max_attempts: int = 100,
) -> SubPermutation:
    """Random legal placement: pinned facilities first, then the rest in
    shuffled order (most constrained first), each on a uniformly chosen free
    legal location. Restarts on dead ends."""
    allowed = legal.allowed
    if allowed.shape != (m, n):
        raise ValueError(f"legality oracle shape {allowed.shape} does not match ({m}, {n})")
    options = allowed.sum(axis=1)
    for _ in range(max_attempts):
        assign = np.full(m, -1, dtype=np.int64)
        free = np.ones(n, dtype=bool)
        for f, loc in legal.pinned.items():
            assign[f] = loc
            free[loc] = False
        rest = np.array([f for f in rng.permutation(m) if f not in legal.pinned], dtype=np.int64)
        rest = rest[np.argsort(options[rest], kind="stable")]
        for f in rest:
            cand = np.flatnonzero(allowed[f] & free)
            if cand.size == 0:
                break
            loc = cand[rng.integers(cand.size)]
            assign[f] = loc
            free[loc] = False
        else:
            return SubPermutation(assign, n)
    raise InfeasibleError(f"no legal random placement found in {max_attempts} attempts")


def select_indices(F, D, P: SubPermutation, strategy, k: int, rng: np.random.Generator, candidates=None) -> np.ndarray:
    """Pick ``k`` facilities: uniformly, or the ``k`` with the largest cost share."""
    strategy = IndexStrategy(strategy)
    pool = np.arange(P.m) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if k > pool.size:
        raise ValueError(f"k={k} exceeds the {pool.size} selectable facilities")
    if strategy is IndexStrategy.RANDOM:
        return np.sort(rng.choice(pool, size=k, replace=False))
    cost = per_facility_cost(F, D, P)[pool]
    order = np.lexsort((pool, -cost))
    return pool[order[:k]]


def select_unbound(
    P: SubPermutation,
    D,
    k_u: int,
    rng: np.random.Generator,
    candidates=None,
    feasible: Callable[[list], bool] | None = None,
) -> np.ndarray:
    """Draw ``k_u`` distinct unbound locations, favouring ones far from the placement.

    Each draw is proportional to the distance to the nearest bound or already
    drawn location (zero distances count as ``1e-9``). ``candidates`` masks the
    eligible locations; ``feasible(chosen)`` may veto a draw, in which case the
    result can be shorter than ``k_u``.
    """
    D = np.asarray(D)
    mask = P.occupant < 0
    if candidates is not None:
        mask &= np.asarray(candidates, dtype=bool)
    pool = np.flatnonzero(mask)
    if k_u > pool.size:
        raise ValueError(f"k_u={k_u} exceeds the {pool.size} eligible unbound locations")
    if k_u == 0:
        return np.zeros(0, dtype=np.int64)
    bound = np.flatnonzero(P.occupant >= 0)
    if bound.size:
        nearest = D[np.ix_(pool, bound)].min(axis=1).astype(np.float64)
    else:
        nearest = np.ones(pool.size)
    alive = np.ones(pool.size, dtype=bool)
    chosen: list[int] = []
    while len(chosen) < k_u and alive.any():
        w = np.where(alive, np.maximum(nearest, ZERO_WEIGHT), 0.0)
        pick = int(rng.choice(pool.size, p=w / w.sum()))
        alive[pick] = False
        loc = int(pool[pick])
        if feasible is not None and not feasible(chosen + [loc]):
            continue
        chosen.append(loc)
        nearest = np.minimum(nearest, D[pool, loc])
    return np.array(chosen, dtype=np.int64)


def _coverable(allowed: np.ndarray, I: np.ndarray) -> Callable[[list], bool]:
    """True when every location in the list can take a distinct facility of I."""
    sub = allowed[I]

    def check(locs: list) -> bool:
        graph = csr_array(sub[:, locs].T.astype(np.int8))
        match = maximum_bipartite_matching(graph, perm_type="column")
        return bool((match >= 0).all())

    return check


@dataclass
class InnerState:
    """Pair-coverage bookkeeping for one outer iteration."""

    pairs_left: set
    rounds: int = 0
    cap: int = 1
    mode: InnerMode = InnerMode.COVERAGE
    fixed_rounds: int = 1
    cap_hit: bool = False

    def record(self, cycles) -> None:
        self.rounds += 1
        for c in cycles:
            self.pairs_left.discard((c.a, c.b))


def inner_termination(state: InnerState) -> bool:
    if state.mode is InnerMode.FIXED:
        return state.rounds >= state.fixed_rounds
    if not state.pairs_left:
        return True
    if state.rounds >= state.cap:
        state.cap_hit = True
        return True
    return False


def inner_round_cap(k: int, k_u: int) -> int:
    s = num_cycles(k, k_u)
    return CAP_FACTOR * math.ceil((k + k_u) / max(s, 1))


def _pair_universe(allowed: np.ndarray, I: np.ndarray, L: np.ndarray) -> set:
    """Unordered location pairs of L that some facility of I could occupy both of."""
    A = allowed[np.ix_(I, L)].astype(np.int64)
    share = (A.T @ A) > 0
    ia, ib = np.nonzero(np.triu(share, k=1))
    return {(int(min(L[x], L[y])), int(max(L[x], L[y]))) for x, y in zip(ia, ib)}


def round_moves(J_cur: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Unbound locations used by one inner round.

    Normally all of them. When the selection leaves fewer than two facilities
    for swaps, a round would consist of moves only and bound-bound pairs could
    never occur; such rounds use a uniformly drawn number of the moves instead.
    """
    if k >= 2 and k - J_cur.size < 2:
        return rng.permutation(J_cur)[: int(rng.integers(0, J_cur.size + 1))]
    return J_cur


def run(
    F,
    D,
    legal: LegalityOracle,
    cfg: ExpansionConfig,
    init: SubPermutation | None = None,
    on_record: Callable[[IterationRecord], None] | None = None,
    on_round: Callable[[dict], None] | None = None,
) -> tuple[SubPermutation, list[IterationRecord]]:
    """Run cyclic expansion; returns the final placement and one record per
    outer iteration (record 0 is the initial placement)."""
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    m, n = F.shape[0], D.shape[0]
    rng = np.random.default_rng(cfg.seed)
    allowed = legal.allowed
    if init is None:
        P = init_random(m, n, legal, rng)
    else:
        P = init.copy()
        if (P.m, P.n) != (m, n):
            raise ValueError("initial placement does not match the instance dimensions")
        bad = legal.violations(P)
        if bad:
            raise InfeasibleError(f"initial placement is illegal for facilities {bad[:10]}")
    movable = np.array([f for f in range(m) if f not in legal.pinned], dtype=np.int64)

    cost = qap_cost(F, D, P)
    records = [IterationRecord(0, cost, 0, 0, 0)]
    if on_record:
        on_record(records[0])
    if movable.size == 0:
        return P, records

    for it in range(1, cfg.max_outer_iters + 1):
        t0 = time.perf_counter()
        before = cost
        k = min(cfg.k, movable.size)
        I = select_indices(F, D, P, cfg.index_strategy, k, rng, candidates=movable)
        eligible = allowed[I].any(axis=0)
        n_free = int(np.count_nonzero(eligible & (P.occupant < 0)))
        k_u = min(cfg.k_u, k, n_free)
        J = select_unbound(P, D, k_u, rng, candidates=eligible, feasible=_coverable(allowed, I))
        if cfg.build_subproblem:
            idx = SubProblemIndex.from_permutation(P, I, J)
            sub = build_subproblem_matrix(F, D, P, idx)
            log.debug("iteration %d: sub-problem matrix of dim %d", it, sub.dim)
        L = np.concatenate([P.assign[I], J])
        state = InnerState(
            pairs_left=_pair_universe(allowed, I, L),
            cap=inner_round_cap(k, len(J)),
            mode=cfg.inner_mode,
            fixed_rounds=cfg.inner_rounds,
        )
        qubo_dim = 0
        while True:
            J_cur = round_moves(L[P.occupant[L] < 0], k, rng)
            try:
                cs = sample_cycle_set(I, J_cur, P, legal, rng)
            except CycleSamplingError as exc:
                log.warning("iteration %d: %s", it, exc)
                break
            if len(cs) == 0:
                break
            Qt = build_alpha_qubo(F, D, P, cs)
            scfg = dataclasses.replace(cfg.solver, seed=int(rng.integers(2**63)))
            res = solve(Qt, scfg)
            apply_selection(P, cs, res.best_x, inplace=True)
            qubo_dim = max(qubo_dim, len(cs))
            state.record(cs)
            if on_round:
                on_round(
                    {
                        "outer_iter": it,
                        "round": state.rounds,
                        "qubo_dim": len(cs),
                        "objective": res.best_objective,
                        "applied": int(res.best_x.sum()),
                    }
                )
            if inner_termination(state):
                break
        cost = qap_cost(F, D, P)
        rec = IterationRecord(
            it, cost, state.rounds, qubo_dim, int((time.perf_counter() - t0) * 1000), state.cap_hit
        )
        records.append(rec)
        if on_record:
            on_record(rec)
        if cfg.rel_improvement_eps > 0 and before > 0 and (before - cost) / before < cfg.rel_improvement_eps:
            break
    return P, records
