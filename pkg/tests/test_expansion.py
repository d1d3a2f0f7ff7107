from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import brute_force_qap, grid_distance, random_flow
from qplace.cycles import TwoCycle
from qplace.expansion import (
    ExpansionConfig,
    InfeasibleError,
    InnerMode,
    InnerState,
    init_random,
    inner_round_cap,
    inner_termination,
    round_moves,
    run,
    select_indices,
    select_unbound,
)
from qplace.fpga import LegalityOracle
from qplace.qap import SubPermutation, qap_cost
from qplace.solvers import SolverConfig

EXH = SolverConfig(backend="exhaustive")
FAST_SA = SolverConfig(num_reads=10, sa_sweeps=100)


def test_init_single_type_is_permutation(rng):
    P = init_random(6, 6, LegalityOracle.unconstrained(6, 6), rng)
    assert sorted(P.assign.tolist()) == list(range(6))


def test_init_forced_assignment(rng):
    allowed = np.ones((3, 5), dtype=bool)
    allowed[0] = [False, False, True, False, False]
    allowed[1:, 2] = False
    legal = LegalityOracle(allowed)
    for _ in range(20):
        assert init_random(3, 5, legal, rng).assign[0] == 2


def test_init_covers_all_assignments():
    rng = np.random.default_rng(0)
    legal = LegalityOracle.unconstrained(2, 3)
    counts = Counter(tuple(init_random(2, 3, legal, rng).assign.tolist()) for _ in range(1000))
    assert len(counts) == 6
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_init_respects_pins(rng):
    legal = LegalityOracle(np.ones((3, 4), dtype=bool), pinned={1: 3})
    for _ in range(10):
        P = init_random(3, 4, legal, rng)
        assert P.assign[1] == 3


def test_init_infeasible(rng):
    allowed = np.zeros((2, 3), dtype=bool)
    allowed[:, 0] = True
    with pytest.raises(InfeasibleError):
        init_random(2, 3, LegalityOracle(allowed), rng, max_attempts=5)


def test_select_full_set(rng):
    F = random_flow(rng, 5)
    D = grid_distance(2, 3)
    P = SubPermutation([0, 1, 2, 3, 4], 6)
    for strategy in ("random", "worst"):
        assert sorted(select_indices(F, D, P, strategy, 5, rng).tolist()) == [0, 1, 2, 3, 4]


def test_select_worst_top_two(rng):
    # diagonal flow gives per-facility costs 5, 1, 7, 3
    F = np.zeros((4, 4))
    D = np.zeros((5, 5))
    P = SubPermutation([0, 1, 2, 3], 5)
    F[0, 0], F[1, 1], F[2, 2], F[3, 3] = 5, 1, 7, 3
    np.fill_diagonal(D, 1)
    assert select_indices(F, D, P, "worst", 2, rng).tolist() == [2, 0]


def test_select_worst_ties_to_lower_index(rng):
    F = np.ones((4, 4)) - np.eye(4)
    D = np.ones((4, 4)) - np.eye(4)
    P = SubPermutation([0, 1, 2, 3], 4)
    assert select_indices(F, D, P, "worst", 3, rng).tolist() == [0, 1, 2]


def test_select_random_reproducible():
    F = np.zeros((10, 10))
    D = np.zeros((10, 10))
    P = SubPermutation(np.arange(10), 10)
    a = select_indices(F, D, P, "random", 4, np.random.default_rng(5))
    b = select_indices(F, D, P, "random", 4, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_unbound_all(rng):
    P = SubPermutation([0], 5)
    D = grid_distance(1, 5)
    assert sorted(select_unbound(P, D, 4, rng).tolist()) == [1, 2, 3, 4]
    with pytest.raises(ValueError):
        select_unbound(P, D, 5, rng)


def test_unbound_single_neighbour_weights():
    P = SubPermutation([0], 5)
    D = grid_distance(1, 5)
    rng = np.random.default_rng(1)
    draws = Counter(int(select_unbound(P, D, 1, rng)[0]) for _ in range(10000))
    # weights 1:2:3:4
    for loc in range(1, 5):
        assert draws[loc] / 10000 == pytest.approx(loc / 10, rel=0.08)


def test_unbound_line_two_to_one():
    P = SubPermutation([0], 3)
    D = grid_distance(1, 3)
    rng = np.random.default_rng(2)
    draws = Counter(int(select_unbound(P, D, 1, rng)[0]) for _ in range(10000))
    assert draws[2] / draws[1] == pytest.approx(2.0, rel=0.05)


def test_unbound_zero_distance_still_samplable(rng):
    D = np.zeros((3, 3))
    P = SubPermutation([0], 3)
    assert sorted(select_unbound(P, D, 2, rng).tolist()) == [1, 2]


def test_termination_single_pair():
    state = InnerState(pairs_left={(0, 1)}, cap=inner_round_cap(1, 1))
    state.record([TwoCycle(0, 1)])
    assert inner_termination(state)
    assert not state.cap_hit


def test_termination_cap():
    state = InnerState(pairs_left={(0, 1), (2, 3)}, cap=2)
    state.record([TwoCycle(0, 1)])
    assert not inner_termination(state)
    state.record([TwoCycle(0, 1)])
    assert inner_termination(state)
    assert state.cap_hit


def test_termination_fixed_mode():
    state = InnerState(pairs_left={(0, 1)}, mode=InnerMode.FIXED, fixed_rounds=3)
    for r in range(3):
        assert not inner_termination(state)
        state.record([TwoCycle(0, 1)])
    assert inner_termination(state)


def test_round_cap_formula():
    assert inner_round_cap(100, 50) == 10 * 2  # s = 75
    assert inner_round_cap(1, 1) == 20


def test_config_validation():
    with pytest.raises(ValueError):
        ExpansionConfig(k=0)
    with pytest.raises(ValueError):
        ExpansionConfig(k=2, k_u=3)
    with pytest.raises(ValueError):
        ExpansionConfig(k=2, rel_improvement_eps=-1)


def test_single_facility():
    F = np.zeros((1, 1))
    D = grid_distance(2, 2)
    P, recs = run(F, D, LegalityOracle.unconstrained(1, 4), ExpansionConfig(k=1, k_u=1, max_outer_iters=3, solver=EXH))
    assert recs[-1].qap_cost == 0
    assert P.m == 1


def test_tiny_optimum_exhaustive():
    rng = np.random.default_rng(11)
    F = random_flow(rng, 5, density=0.7)
    D = grid_distance(3, 3)
    best = brute_force_qap(F, D)
    cfg = ExpansionConfig(k=5, k_u=4, max_outer_iters=50, solver=EXH, seed=0)
    _, recs = run(F, D, LegalityOracle.unconstrained(5, 9), cfg)
    assert recs[-1].qap_cost == best


def typed_instance(seed):
    rng = np.random.default_rng(seed)
    m, n = 8, 12
    F = random_flow(rng, m)
    D = grid_distance(3, 4)
    loc_type = np.arange(n) % 3 == 0
    fac_type = np.arange(m) % 4 == 0
    allowed = fac_type[:, None] == loc_type[None, :]
    return F, D, LegalityOracle(allowed)


@pytest.mark.parametrize("seed", range(5))
def test_monotone_legal_injective(seed):
    F, D, legal = typed_instance(seed)
    cfg = ExpansionConfig(k=6, k_u=3, max_outer_iters=8, solver=FAST_SA, seed=seed)
    P0 = init_random(8, 12, legal, np.random.default_rng(seed))
    P, recs = run(F, D, legal, cfg, init=P0)
    costs = [r.qap_cost for r in recs]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert legal.violations(P) == []
    assert len(set(P.assign.tolist())) == P.m
    assert costs[-1] == qap_cost(F, D, P)


def test_every_round_monotone():
    F, D, legal = typed_instance(3)
    objectives = []
    cfg = ExpansionConfig(k=8, k_u=4, max_outer_iters=5, solver=FAST_SA, seed=1)
    _, recs = run(F, D, legal, cfg, on_round=lambda e: objectives.append(e["objective"]))
    seq = [recs[0].qap_cost] + objectives
    assert all(b <= a for a, b in zip(seq, seq[1:]))


def test_deterministic():
    F, D, legal = typed_instance(4)
    cfg = ExpansionConfig(k=6, k_u=2, max_outer_iters=5, solver=FAST_SA, seed=9)
    Pa, ra = run(F, D, legal, cfg)
    Pb, rb = run(F, D, legal, cfg)
    assert Pa == Pb
    assert [r.qap_cost for r in ra] == [r.qap_cost for r in rb]


def test_pinned_never_move():
    rng = np.random.default_rng(0)
    F = random_flow(rng, 6)
    D = grid_distance(3, 3)
    legal = LegalityOracle(np.ones((6, 9), dtype=bool), pinned={0: 4, 5: 0})
    P, _ = run(F, D, legal, ExpansionConfig(k=6, k_u=3, max_outer_iters=5, solver=EXH))
    assert P.assign[0] == 4 and P.assign[5] == 0


def test_rel_improvement_stops_early():
    rng = np.random.default_rng(0)
    F = random_flow(rng, 5)
    D = grid_distance(3, 3)
    cfg = ExpansionConfig(k=5, k_u=4, max_outer_iters=50, rel_improvement_eps=0.5, solver=EXH)
    _, recs = run(F, D, LegalityOracle.unconstrained(5, 9), cfg)
    assert len(recs) < 51


def test_subproblem_diagnostic_path():
    rng = np.random.default_rng(0)
    F = random_flow(rng, 4)
    D = grid_distance(2, 3)
    cfg = ExpansionConfig(k=3, k_u=2, max_outer_iters=2, solver=EXH, build_subproblem=True)
    _, recs = run(F, D, LegalityOracle.unconstrained(4, 6), cfg)
    assert len(recs) == 3


def test_bad_init_rejected():
    allowed = np.ones((2, 3), dtype=bool)
    allowed[0, 0] = False
    with pytest.raises(InfeasibleError):
        run(np.zeros((2, 2)), np.zeros((3, 3)), LegalityOracle(allowed), ExpansionConfig(k=1), init=SubPermutation([0, 1], 3))


def test_record_zero_is_initial():
    rng = np.random.default_rng(0)
    F = random_flow(rng, 4)
    D = grid_distance(2, 3)
    P0 = SubPermutation([0, 1, 2, 3], 6)
    _, recs = run(F, D, LegalityOracle.unconstrained(4, 6), ExpansionConfig(k=2, max_outer_iters=1, solver=EXH), init=P0)
    assert recs[0].outer_iter == 0 and recs[0].qap_cost == qap_cost(F, D, P0)
    assert [r.outer_iter for r in recs] == [0, 1]


def test_round_moves_keeps_all_when_swaps_possible(rng):
    J = np.array([7, 8, 9])
    assert round_moves(J, 6, rng).tolist() == [7, 8, 9]


def test_round_moves_varies_when_no_swaps_fit():
    rng = np.random.default_rng(0)
    J = np.arange(4)
    sizes = {round_moves(J, 5, rng).size for _ in range(200)}
    assert sizes == {0, 1, 2, 3, 4}
    assert round_moves(J[:1], 1, rng).tolist() == [0]
