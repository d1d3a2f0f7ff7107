"""Quadratic assignment data model and the bilinear cost.

Flow and distance matrices are plain float64 ndarrays; ``check_flow`` and
``check_distance`` validate them. A sub-permutation assigns each of ``m``
facilities to a distinct one of ``n >= m`` locations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNBOUND = -1


class DimensionError(ValueError):
    """Flow, distance and assignment shapes do not fit together."""


def _square(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_flow(entries) -> np.ndarray:
    """Return ``entries`` as a validated m x m flow matrix."""
    F = _square(entries, "flow matrix")
    if (F < 0).any():
        raise ValueError("flow matrix has negative entries")
    if not np.array_equal(F, F.T):
        raise ValueError("flow matrix is not symmetric")
    if np.any(np.diag(F) != 0):
        raise ValueError("flow matrix has a nonzero diagonal")
    return F


def check_distance(entries, metric: bool = False) -> np.ndarray:
    """Return ``entries`` as a validated n x n distance matrix.

    With ``metric=True`` the triangle inequality is checked as well (O(n^3)).
    """
    D = _square(entries, "distance matrix")
    if (D < 0).any():
        raise ValueError("distance matrix has negative entries")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix is not symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix has a nonzero diagonal")
    if metric:
        for k in range(D.shape[0]):
            if (D > D[:, k : k + 1] + D[k : k + 1, :]).any():
                raise ValueError("distance matrix violates the triangle inequality")
    return D


class SubPermutation:
    """Injective map from ``m`` facilities into ``n`` locations.

    ``assign[i]`` is the location of facility ``i``; ``occupant[l]`` is the
    facility on location ``l`` or ``UNBOUND``. Both arrays are kept in sync by
    :meth:`swap_locations`, the only mutating operation.
    """

    __slots__ = ("assign", "occupant", "n")

    def __init__(self, assign, n: int):
        assign = np.array(assign, dtype=np.int64).reshape(-1)
        n = int(n)
        if assign.size > n:
            raise DimensionError(f"{assign.size} facilities do not fit into {n} locations")
        if assign.size and (assign.min() < 0 or assign.max() >= n):
            raise ValueError("assignment refers to a location outside [0, n)")
        occupant = np.full(n, UNBOUND, dtype=np.int64)
        occupant[assign] = np.arange(assign.size)
        if np.count_nonzero(occupant != UNBOUND) != assign.size:
            raise ValueError("assignment is not injective")
        self.assign = assign
        self.occupant = occupant
        self.n = n

    @property
    def m(self) -> int:
        return int(self.assign.size)

    @classmethod
    def from_matrix(cls, X) -> "SubPermutation":
        X = np.asarray(X)
        if X.ndim != 2:
            raise DimensionError("sub-permutation matrix must be 2-d")
        if not np.isin(X, (0, 1)).all():
            raise ValueError("sub-permutation matrix must be binary")
        if not (X.sum(axis=1) == 1).all() or (X.sum(axis=0) > 1).any():
            raise ValueError("rows must sum to 1 and columns to at most 1")
        return cls(X.argmax(axis=1), X.shape[1])

    def to_matrix(self) -> np.ndarray:
        X = np.zeros((self.m, self.n), dtype=np.int64)
        X[np.arange(self.m), self.assign] = 1
        return X

    def copy(self) -> "SubPermutation":
        new = object.__new__(SubPermutation)
        new.assign = self.assign.copy()
        new.occupant = self.occupant.copy()
        new.n = self.n
        return new

    def is_bound(self, loc: int) -> bool:
        return self.occupant[loc] != UNBOUND

    def bound_set(self) -> "BoundSet":
        mask = self.occupant != UNBOUND
        return BoundSet(
            bound=frozenset(np.flatnonzero(mask).tolist()),
            unbound=frozenset(np.flatnonzero(~mask).tolist()),
        )

    def unbound_locations(self) -> np.ndarray:
        return np.flatnonzero(self.occupant == UNBOUND)

    def swap_locations(self, a: int, b: int) -> None:
        """Exchange the occupants of locations ``a`` and ``b`` in place."""
        fa, fb = self.occupant[a], self.occupant[b]
        self.occupant[a], self.occupant[b] = fb, fa
        if fa != UNBOUND:
            self.assign[fa] = b
        if fb != UNBOUND:
            self.assign[fb] = a

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubPermutation):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.assign, other.assign)

    def __repr__(self) -> str:
        return f"SubPermutation(assign={self.assign.tolist()}, n={self.n})"


@dataclass(frozen=True)
class BoundSet:
    bound: frozenset
    unbound: frozenset


def _check_dims(F: np.ndarray, D: np.ndarray, P: SubPermutation) -> None:
    if F.shape != (P.m, P.m):
        raise DimensionError(f"flow matrix {F.shape} does not match m={P.m}")
    if D.shape != (P.n, P.n):
        raise DimensionError(f"distance matrix {D.shape} does not match n={P.n}")


def qap_cost(F, D, P: SubPermutation) -> float:
    """Sum over facility pairs of flow times distance between their locations."""
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    _check_dims(F, D, P)
    a = P.assign
    return float((F * D[np.ix_(a, a)]).sum())


def qap_cost_bilinear(F, D, A, B) -> float:
    """``tr(F A D B^T)`` for real m x n matrices ``A`` and ``B``."""
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    m, n = F.shape[0], D.shape[0]
    if A.shape != (m, n) or B.shape != (m, n):
        raise DimensionError(f"expected {m}x{n} arguments, got {A.shape} and {B.shape}")
    # tr(F A D B^T) = sum_ij F_ij (A D B^T)_ji
    return float(np.einsum("ij,ji->", F, A @ D @ B.T))


def per_facility_cost(F, D, P: SubPermutation) -> np.ndarray:
    """Row sums of the cost: facility ``i`` gets ``sum_j F[i,j] D[pi(i), pi(j)]``."""
    F = np.asarray(F, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    _check_dims(F, D, P)
    a = P.assign
    return (F * D[np.ix_(a, a)]).sum(axis=1)
