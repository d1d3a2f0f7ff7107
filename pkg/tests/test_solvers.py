import itertools
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_flow, random_perm
from qplace.cycles import TwoCycleSet, apply_selection
from qplace.qap import qap_cost
from qplace.qubo import QuboProblem, build_alpha_qubo
from qplace.solvers import (
    Backend,
    ExternalSolverError,
    SolverConfig,
    SolverError,
    auto_beta_range,
    read_seeds,
    solve,
    solve_exhaustive,
    solve_sa,
)

EXH = SolverConfig(backend="exhaustive")


def naive_min(problem):
    best = None
    for bits in itertools.product((0, 1), repeat=problem.dim):
        v = problem.objective(bits)
        if best is None or v < best[0]:
            best = (v, np.array(bits))
    return best


def random_qubo(rng, d, integer=True):
    q = rng.integers(-5, 6, size=(d, d)) if integer else rng.normal(size=(d, d))
    return QuboProblem(q, offset=float(rng.integers(0, 10)))


def test_single_variable():
    res = solve(QuboProblem([[-1.0]]), EXH)
    assert res.best_x.tolist() == [1]
    assert res.best_objective == -1


def test_identity_prefers_zero():
    res = solve(QuboProblem(np.eye(2), offset=5), EXH)
    assert res.best_x.tolist() == [0, 0]
    assert res.best_objective == 5


def test_empty_problem():
    res = solve_exhaustive(QuboProblem(np.zeros((0, 0)), offset=3.5))
    assert res.best_x.size == 0
    assert res.best_objective == 3.5


def test_zero_matrix_tie_break():
    res = solve_exhaustive(QuboProblem(np.zeros((5, 5))))
    assert res.best_x.tolist() == [0] * 5


def test_tie_break_lexicographic():
    # x = [0, 1] and [1, 0] both reach -1
    q = np.array([[-1.0, 1.0], [1.0, -1.0]])
    assert solve_exhaustive(QuboProblem(q)).best_x.tolist() == [0, 1]


def test_exhaustive_cap():
    with pytest.raises(SolverError):
        solve_exhaustive(QuboProblem(np.zeros((5, 5))), max_dim=4)


@pytest.mark.parametrize("d", range(1, 13))
def test_gray_matches_naive(d):
    rng = np.random.default_rng(d)
    for _ in range(3 if d > 9 else 10):
        p = random_qubo(rng, d)
        val, x = naive_min(p)
        res = solve_exhaustive(p)
        assert res.best_objective == val
        assert np.array_equal(res.best_x, x)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_objective_rederivable(d, seed):
    p = random_qubo(np.random.default_rng(seed), d, integer=False)
    for cfg in (EXH, SolverConfig(num_reads=5, sa_sweeps=50, seed=seed)):
        res = solve(p, cfg)
        assert res.best_objective == pytest.approx(p.objective(res.best_x), rel=1e-9, abs=1e-12)
        assert res.best_objective <= p.offset + 1e-12


def test_alpha_qubo_cross_check(rng):
    F = random_flow(rng, 5)
    D = rng.integers(0, 5, size=(6, 6)).astype(float)
    D = D + D.T
    P = random_perm(rng, 5, 6)
    cs = TwoCycleSet([(0, 1), (2, 3), (4, 5)])
    Qt = build_alpha_qubo(F, D, P, cs)
    costs = {a: qap_cost(F, D, apply_selection(P, cs, a)) for a in itertools.product((0, 1), repeat=3)}
    best = min(costs.values())
    first = min(a for a, c in costs.items() if c == best)
    res = solve_exhaustive(Qt)
    assert res.best_objective == best
    assert tuple(res.best_x.tolist()) == first


def test_sa_frozen_limit():
    q = np.diag([-1.0, -2.0, -3.0, -0.5])
    cfg = SolverConfig(num_reads=3, sa_sweeps=5, sa_beta_range=(1e6, 1e6))
    res = solve_sa(QuboProblem(q), cfg)
    assert res.best_x.tolist() == [1, 1, 1, 1]


def test_sa_deterministic(rng):
    p = random_qubo(rng, 15)
    cfg = SolverConfig(num_reads=10, sa_sweeps=100, seed=42)
    assert solve_sa(p, cfg) == solve_sa(p, cfg)


def test_read_seeds_depend_on_seed():
    a, b = read_seeds(1, 4), read_seeds(2, 4)
    assert len(set(a.tolist())) == 4
    assert not np.array_equal(a, b)
    assert np.array_equal(read_seeds(1, 2), a[:2])


def test_auto_beta_range():
    lo, hi = auto_beta_range(np.diag([-4.0, 1.0]))
    assert lo == pytest.approx(np.log(2) / 4)
    assert hi == pytest.approx(np.log(100))
    assert auto_beta_range(np.zeros((2, 2))) == (1.0, 1.0)
    lo, hi = auto_beta_range(np.array([[0.0, 1.5], [1.5, 0.0]]))
    assert lo == pytest.approx(np.log(2) / 3)


def test_sa_matches_exhaustive_on_random_12_dim():
    rng = np.random.default_rng(7)
    hits = 0
    for t in range(100):
        p = random_qubo(rng, 12)
        exact = solve_exhaustive(p).best_objective
        sa = solve_sa(p, SolverConfig(num_reads=100, sa_sweeps=200, seed=t)).best_objective
        hits += sa == exact
    assert hits >= 95


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(num_reads=0)
    with pytest.raises(ValueError):
        SolverConfig(sa_beta_range=(0.0, 1.0))
    with pytest.raises(ValueError):
        SolverConfig(backend="external")
    with pytest.raises(ValueError):
        SolverConfig(seed=-1)
    assert SolverConfig(backend="exhaustive").backend is Backend.EXHAUSTIVE


def ext(cmd, **kw):
    return SolverConfig(backend="external", external_cmd=cmd, **kw)


PY = sys.executable


def test_external_loopback(rng):
    p = random_qubo(rng, 8)
    res = solve(p, ext(f"{PY} -m qplace.shim"))
    assert res == solve_exhaustive(p)


def test_external_nonzero_exit():
    cmd = f"{PY} -c \"import sys; sys.stderr.write('boom'); sys.exit(3)\""
    with pytest.raises(ExternalSolverError) as info:
        solve(QuboProblem(np.eye(2)), ext(cmd))
    assert "boom" in str(info.value)
    assert "3" in str(info.value)


def test_external_wrong_objective():
    cmd = f"{PY} -c \"import sys, json; json.load(sys.stdin); print(json.dumps({{'x': [1, 1], 'objective': -99}}))\""
    with pytest.raises(ExternalSolverError, match="mismatch"):
        solve(QuboProblem(np.eye(2)), ext(cmd))


def test_external_malformed_output():
    cmd = f"{PY} -c \"print('not json')\""
    with pytest.raises(ExternalSolverError, match="malformed"):
        solve(QuboProblem(np.eye(2)), ext(cmd))


def test_external_timeout():
    cmd = f"{PY} -c \"import time; time.sleep(5)\""
    with pytest.raises(ExternalSolverError, match="exceeded"):
        solve(QuboProblem(np.eye(2)), ext(cmd, time_limit_ms=300))


def test_external_missing_binary():
    with pytest.raises(ExternalSolverError):
        solve(QuboProblem(np.eye(2)), ext("/nonexistent/solver"))
