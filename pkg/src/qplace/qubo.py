"""QUBO builders: the monolithic penalty form, the restricted sub-problem
matrix and the cycle-selection matrix used by the expansion loop.

Every builder returns a :class:`QuboProblem` whose objective is
``x^T q x + offset`` with ``q`` symmetric.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .cycles import TwoCycleSet, delta_entries
from .qap import UNBOUND, DimensionError, SubPermutation


@dataclass(frozen=True, eq=False)
class QuboProblem:
    q: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"QUBO matrix must be square, got {q.shape}")
        q = (q + q.T) / 2
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(x @ self.q @ x) + self.offset

    def to_json(self) -> dict:
        """Exchange document with upper-triangular ``[i, j, coefficient]`` terms."""
        q = self.q
        terms = []
        for i in range(self.dim):
            for j in range(i, self.dim):
                v = q[i, i] if i == j else 2.0 * q[i, j]
                if v != 0.0:
                    terms.append([i, j, float(v)])
        return {"dim": self.dim, "offset": self.offset, "terms": terms}

    @classmethod
    def from_json(cls, doc: dict) -> "QuboProblem":
        try:
            dim = int(doc["dim"])
            offset = float(doc.get("offset", 0.0))
            terms = doc["terms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed QUBO document: {exc}") from exc
        if dim < 0:
            raise ValueError("QUBO dim must be nonnegative")
        q = np.zeros((dim, dim))
        for term in terms:
            i, j, v = int(term[0]), int(term[1]), float(term[2])
            if not (0 <= i < dim and 0 <= j < dim):
                raise ValueError(f"term ({i}, {j}) out of range for dim {dim}")
            if i == j:
                q[i, i] += v
            else:
                q[i, j] += v / 2
                q[j, i] += v / 2
        return cls(q, offset)

    def dump(self, fp: IO[str]) -> None:
        json.dump(self.to_json(), fp)

    @classmethod
    def load(cls, fp: IO[str]) -> "QuboProblem":
        return cls.from_json(json.load(fp))


@dataclass(frozen=True)
class PenaltyParams:
    lam: float
    mu: float

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError("penalty parameters must be strictly positive")


def default_penalties(F, D) -> PenaltyParams:
    """Total flow times the largest distance, plus one.

    No feasible assignment costs more than ``sum(F) * max(D)``, so any single
    constraint violation is strictly more expensive than every feasible point.
    """
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    dmax = float(D.max()) if D.size else 0.0
    bound = 1.0 + float(F.sum()) * dmax
    return PenaltyParams(bound, bound)


def build_full_qubo(F, D, params: PenaltyParams | None = None) -> QuboProblem:
    """Penalty QUBO over ``(vec(X), slack)`` with ``m*n + n`` variables.

    Assignment variable ``i*n + l`` means facility ``i`` sits on location
    ``l``; slack variable ``m*n + l`` absorbs the column sum of location ``l``.
    """
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    m, n = F.shape[0], D.shape[0]
    if m > n:
        raise DimensionError(f"{m} facilities cannot be placed on {n} locations")
    if params is None:
        params = default_penalties(F, D)
    dim = m * n + n
    q = np.zeros((dim, dim))
    q[: m * n, : m * n] = np.kron(F, D)

    # lam * ||A x - 1||^2 with A = I_m kron 1_n^T
    A = np.zeros((m, dim))
    A[:, : m * n] = np.kron(np.eye(m), np.ones((1, n)))
    q += params.lam * (A.T @ A)
    q[np.diag_indices(dim)] -= 2 * params.lam * A.sum(axis=0)

    # mu * ||B x - s||^2 with B = 1_m^T kron I_n
    B = np.zeros((n, dim))
    B[:, : m * n] = np.kron(np.ones((1, m)), np.eye(n))
    B[:, m * n :] = -np.eye(n)
    q += params.mu * (B.T @ B)

    return QuboProblem(q, offset=params.lam * m)


def decode_full_qubo(x, m: int, n: int) -> SubPermutation | None:
    """Sub-permutation encoded by the assignment part of ``x``, or None if infeasible."""
    X = np.asarray(x[: m * n]).reshape(m, n)
    slack = np.asarray(x[m * n : m * n + n])
    if not (X.sum(axis=1) == 1).all() or (X.sum(axis=0) > 1).any():
        return None
    if not np.array_equal(X.sum(axis=0), slack):
        return None
    return SubPermutation.from_matrix(X)


@dataclass(frozen=True)
class SubProblemIndex:
    """Facilities ``I`` and unbound locations ``J`` of one sub-problem.

    ``image`` lists the current locations of ``I`` (same order) and
    ``image_ext`` is ``image`` followed by ``J``.
    """

    facilities: tuple
    unbound_locs: tuple
    image: tuple
    image_ext: tuple

    @classmethod
    def from_permutation(cls, P: SubPermutation, facilities: Sequence[int], unbound_locs: Sequence[int] = ()):
        facilities = tuple(int(i) for i in facilities)
        unbound_locs = tuple(int(j) for j in unbound_locs)
        if len(set(facilities)) != len(facilities):
            raise ValueError("duplicate facility in index set")
        if len(set(unbound_locs)) != len(unbound_locs):
            raise ValueError("duplicate location in unbound set")
        if any(P.occupant[j] != UNBOUND for j in unbound_locs):
            raise ValueError("J intersects the bound locations")
        image = tuple(int(P.assign[i]) for i in facilities)
        return cls(facilities, unbound_locs, image, image + unbound_locs)

    def check(self, P: SubPermutation) -> None:
        if tuple(int(P.assign[i]) for i in self.facilities) != self.image:
            raise ValueError("index image does not match the sub-permutation")
        if self.image_ext != self.image + self.unbound_locs:
            raise ValueError("extended image must be image followed by J")
        if any(P.occupant[j] != UNBOUND for j in self.unbound_locs):
            raise ValueError("J intersects the bound locations")

    def encode(self, assign_of_I: Sequence[int]) -> np.ndarray:
        """Binary vector ``vec(P_{I, I'})`` for a placement of ``I`` inside ``image_ext``."""
        cols = {loc: c for c, loc in enumerate(self.image_ext)}
        width = len(self.image_ext)
        x = np.zeros(len(self.facilities) * width, dtype=np.int64)
        for r, loc in enumerate(assign_of_I):
            x[r * width + cols[int(loc)]] = 1
        return x


def build_subproblem_matrix(F, D, P: SubPermutation, idx: SubProblemIndex) -> QuboProblem:
    """Restricted cost matrix over placements of ``I`` inside ``I_pi + J``.

    Quadratic part ``F_I kron D_{I'}``; the interaction with the fixed
    complement goes on the diagonal. The complement-only constant is dropped,
    so only objective differences are meaningful unless ``I`` is everything.
    """
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    idx.check(P)
    I = np.array(idx.facilities, dtype=np.int64)
    L = np.array(idx.image_ext, dtype=np.int64)
    comp = np.setdiff1d(np.arange(P.m), I)
    comp_locs = P.assign[comp]
    q = np.kron(F[np.ix_(I, I)], D[np.ix_(L, L)])
    # sum_{j in I^c} F[i,j] D[l, pi(j)] + F[j,i] D[pi(j), l]; equals twice the
    # first term for symmetric F and D
    lin = F[np.ix_(I, comp)] @ D[np.ix_(L, comp_locs)].T + F[np.ix_(comp, I)].T @ D[np.ix_(comp_locs, L)]
    q[np.diag_indices_from(q)] += lin.reshape(-1)
    return QuboProblem(q)


def _cycle_entries(P: SubPermutation, cs: TwoCycleSet):
    rows, cols, vals, owner = [], [], [], []
    for t, c in enumerate(cs):
        for f, loc, v in delta_entries(P, c):
            rows.append(f)
            cols.append(loc)
            vals.append(v)
            owner.append(t)
    return (
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.array(vals, dtype=np.float64),
        np.array(owner, dtype=np.int64),
    )


def build_alpha_qubo(F, D, P: SubPermutation, cs: TwoCycleSet) -> QuboProblem:
    """Cycle-selection QUBO: ``objective(alpha) == cost(apply_selection(P, cs, alpha))``.

    With ``dX_t = X (C_t - I)`` the change from cycle ``t`` alone, off-diagonal
    entries are ``c(dX_s, dX_t)`` and the diagonal is
    ``c(dX_t) + c(dX_t, X) + c(X, dX_t)``; the offset is ``c(X)``. Each
    ``dX_t`` has at most four nonzeros, so only rows of F and entries of D
    touched by them are read.

    ``c`` is evaluated as ``tr(F A D^T B^T)`` so that the objective agrees
    with :func:`qap_cost` also for asymmetric ``D``.
    """
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    s = len(cs)
    if F.shape != (P.m, P.m) or D.shape != (P.n, P.n):
        raise DimensionError("flow/distance shapes do not match the sub-permutation")
    a = P.assign
    offset = float((F * D[np.ix_(a, a)]).sum())
    if s == 0:
        return QuboProblem(np.zeros((0, 0)), offset)
    rows, cols, vals, owner = _cycle_entries(P, cs)
    q = np.zeros((s, s))
    if rows.size:
        # c(A, B) = sum over entries (j, p, u) of A and (i, r, w) of B of F[i, j] u w D[p, r]
        Dt = D.T
        pair = F[np.ix_(rows, rows)].T * Dt[np.ix_(cols, cols)] * np.outer(vals, vals)
        S = np.zeros((s, rows.size))
        S[owner, np.arange(rows.size)] = 1.0
        q = S @ pair @ S.T
        # c(dX, X) + c(X, dX) per entry
        lin = vals * (
            np.einsum("ie,ei->e", F[:, rows], Dt[np.ix_(cols, a)])
            + np.einsum("ei,ie->e", F[rows, :], Dt[np.ix_(a, cols)])
        )
        q[np.diag_indices(s)] += np.bincount(owner, weights=lin, minlength=s)
    return QuboProblem(q, offset)
