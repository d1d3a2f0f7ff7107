"""Two-cycles (location transpositions), disjoint cycle sets and their action.

A cycle ``(a, b)`` exchanges whatever occupies locations ``a`` and ``b``. If
exactly one of them is bound this moves a single facility; if both are bound
it swaps two facilities. In matrix form, with rows indexing facilities, a
selection acts as ``X -> X C_1^{alpha_1} ... C_s^{alpha_s}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse

from .qap import UNBOUND, SubPermutation

Legality = Callable[[int, int], bool]

MAX_RESAMPLE = 50


class CycleSamplingError(RuntimeError):
    """No legal pairing was found; ``diagnostic`` describes the best attempt."""

    def __init__(self, message: str, diagnostic: dict | None = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


@dataclass(frozen=True, order=True)
class TwoCycle:
    a: int
    b: int

    def __post_init__(self):
        a, b = int(self.a), int(self.b)
        if a == b:
            raise ValueError(f"degenerate 2-cycle ({a}, {b})")
        if a < 0 or b < 0:
            raise ValueError("cycle endpoints must be nonnegative")
        object.__setattr__(self, "a", min(a, b))
        object.__setattr__(self, "b", max(a, b))

    def matrix(self, n: int) -> np.ndarray:
        C = np.eye(n, dtype=np.int64)
        C[[self.a, self.b]] = C[[self.b, self.a]]
        return C


class TwoCycleSet:
    """Ordered collection of pairwise disjoint 2-cycles."""

    __slots__ = ("cycles",)

    def __init__(self, cycles: Iterable = ()):
        cycles = tuple(c if isinstance(c, TwoCycle) else TwoCycle(*c) for c in cycles)
        seen: set[int] = set()
        for c in cycles:
            if c.a in seen or c.b in seen:
                raise ValueError(f"cycle {c} overlaps another cycle in the set")
            seen.update((c.a, c.b))
        self.cycles = cycles

    def __len__(self) -> int:
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    def __getitem__(self, i):
        return self.cycles[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TwoCycleSet):
            return NotImplemented
        return self.cycles == other.cycles

    def __repr__(self) -> str:
        return "TwoCycleSet([" + ", ".join(f"({c.a}, {c.b})" for c in self.cycles) + "])"

    def endpoints(self) -> np.ndarray:
        return np.array([[c.a, c.b] for c in self.cycles], dtype=np.int64).reshape(-1, 2)

    def product_matrix(self, n: int, alpha=None) -> np.ndarray:
        """``C_1^{alpha_1} ... C_s^{alpha_s}`` as a dense n x n matrix."""
        alpha = np.ones(len(self), dtype=np.int64) if alpha is None else as_selection(alpha, len(self))
        out = np.eye(n, dtype=np.int64)
        for c, on in zip(self.cycles, alpha):
            if on:
                out = out @ c.matrix(n)
        return out


def as_selection(alpha, s: int) -> np.ndarray:
    """Validate a binary selection vector of length ``s``."""
    alpha = np.asarray(alpha).reshape(-1)
    if alpha.size != s:
        raise ValueError(f"selection has length {alpha.size}, cycle set has {s} cycles")
    if not np.isin(alpha, (0, 1)).all():
        raise ValueError("selection entries must be 0 or 1")
    return alpha.astype(np.int8)


def _check_range(cs: TwoCycleSet, n: int) -> None:
    for c in cs:
        if c.b >= n:
            raise ValueError(f"cycle {c} has an endpoint outside [0, {n})")


def apply_selection(P: SubPermutation, cs: TwoCycleSet, alpha, inplace: bool = False) -> SubPermutation:
    """Apply the cycles whose selection bit is set; returns the updated P."""
    alpha = as_selection(alpha, len(cs))
    _check_range(cs, P.n)
    out = P if inplace else P.copy()
    for c, on in zip(cs.cycles, alpha):
        if on:
            out.swap_locations(c.a, c.b)
    return out


def delta_entries(P: SubPermutation, c: TwoCycle) -> list[tuple[int, int, int]]:
    """Nonzero ``(facility, location, value)`` entries of ``X(C - I)``."""
    if c.b >= P.n:
        raise ValueError(f"cycle {c} has an endpoint outside [0, {P.n})")
    out = []
    fa, fb = int(P.occupant[c.a]), int(P.occupant[c.b])
    if fa != UNBOUND:
        out += [(fa, c.a, -1), (fa, c.b, 1)]
    if fb != UNBOUND:
        out += [(fb, c.b, -1), (fb, c.a, 1)]
    return out


def delta_matrix(P: SubPermutation, c: TwoCycle) -> sparse.csr_array:
    """Change of the assignment matrix caused by applying ``c`` alone."""
    entries = delta_entries(P, c)
    rows = [e[0] for e in entries]
    cols = [e[1] for e in entries]
    vals = [e[2] for e in entries]
    return sparse.csr_array((vals, (rows, cols)), shape=(P.m, P.n), dtype=np.int64)


def cycle_is_legal(P: SubPermutation, c: TwoCycle, legal: Legality) -> bool:
    """A cycle is legal if every facility it moves fits its target location."""
    fa, fb = P.occupant[c.a], P.occupant[c.b]
    if fa != UNBOUND and not legal(int(fa), c.b):
        return False
    if fb != UNBOUND and not legal(int(fb), c.a):
        return False
    return True


def num_cycles(k: int, k_u: int) -> int:
    """Cycle count of a sampled set: one move per unbound location plus pair swaps."""
    return k_u + (k - k_u) // 2


def _legal_matrix(legal: Legality, facs: np.ndarray, locs: np.ndarray) -> np.ndarray:
    allowed = getattr(legal, "allowed", None)
    if allowed is not None:
        return np.asarray(allowed)[np.ix_(facs, locs)]
    return np.array([[legal(int(f), int(l)) for l in locs] for f in facs], dtype=bool).reshape(facs.size, locs.size)


def sample_cycle_set(
    selected: Sequence[int],
    unbound: Sequence[int],
    P: SubPermutation,
    legal: Legality,
    rng: np.random.Generator,
    max_resample: int = MAX_RESAMPLE,
    strict: bool = False,
    patience: int = 8,
) -> TwoCycleSet:
    """Sample legal disjoint cycles over the selected facilities.

    Each unbound location in ``unbound`` is paired with a distinct selected
    facility (a move), then the locations of the remaining selected facilities
    are paired with each other (swaps). Pairings are greedy over shuffled
    orders, retried up to ``max_resample`` times keeping the largest set;
    retrying stops early after ``patience`` attempts without improvement.

    Type constraints can make the full ``k_u + (k - k_u) // 2`` cycles
    unreachable; with ``strict=False`` the largest legal set found is returned,
    otherwise :class:`CycleSamplingError` is raised. Failing to place every
    unbound location always raises.
    """
    selected = np.asarray(selected, dtype=np.int64)
    unbound = np.asarray(unbound, dtype=np.int64)
    k, k_u = selected.size, unbound.size
    if k_u > k:
        raise ValueError(f"k_u={k_u} exceeds k={k}")
    if k_u and (P.occupant[unbound] != UNBOUND).any():
        raise ValueError("unbound location list contains bound locations")
    target = num_cycles(k, k_u)
    here = P.assign[selected]
    fits = _legal_matrix(legal, selected, here)
    swap_ok = fits & fits.T  # facility x may go to y's spot and vice versa
    move_ok = _legal_matrix(legal, selected, unbound)

    best: list[tuple[int, int]] | None = None
    moves_failed = 0
    stale = 0
    for _ in range(max(1, max_resample)):
        forder = rng.permutation(k)
        jorder = rng.permutation(k_u)
        used = np.zeros(k, dtype=bool)
        pairs: list[tuple[int, int]] = []
        mv = move_ok[np.ix_(forder, jorder)]
        ok = True
        for jj in range(k_u):
            cand = np.flatnonzero(mv[:, jj] & ~used)
            if cand.size == 0:
                ok = False
                break
            used[cand[0]] = True
            pairs.append((int(here[forder[cand[0]]]), int(unbound[jorder[jj]])))
        if not ok:
            moves_failed += 1
            continue
        rest = forder[~used]
        sw = swap_ok[np.ix_(rest, rest)]
        paired = np.zeros(rest.size, dtype=bool)
        for x in range(rest.size):
            if len(pairs) == target:
                break
            if paired[x]:
                continue
            cand = np.flatnonzero(sw[x, x + 1 :] & ~paired[x + 1 :])
            if cand.size:
                y = x + 1 + cand[0]
                paired[x] = paired[y] = True
                pairs.append((int(here[rest[x]]), int(here[rest[y]])))
        if best is None or len(pairs) > len(best):
            best, stale = pairs, 0
        else:
            stale += 1
        if len(best) == target or stale >= patience:
            break

    if best is None:
        raise CycleSamplingError(
            f"no legal assignment of {k_u} unbound locations to {k} facilities "
            f"after {max_resample} attempts",
            {"k": k, "k_u": k_u, "attempts": max_resample, "moves_failed": moves_failed},
        )
    if strict and len(best) < target:
        raise CycleSamplingError(
            f"found at most {len(best)} of {target} legal cycles",
            {"k": k, "k_u": k_u, "best": len(best), "target": target},
        )
    return TwoCycleSet(best)


def decompose_into_two_involutions(perm) -> tuple[TwoCycleSet, TwoCycleSet]:
    """Split a permutation into two products of disjoint transpositions.

    ``perm[i]`` is the image of ``i``. Returns ``(L, R)`` with
    ``perm[i] == L(R(i))``: each cycle ``(c_0 ... c_{l-1})`` is written as the
    reflection ``c_i -> c_{1-i}`` after the reflection ``c_i -> c_{-i}``.
    """
    perm = np.asarray(perm, dtype=np.int64).reshape(-1)
    n = perm.size
    if not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("input is not a bijection on [0, n)")
    seen = np.zeros(n, dtype=bool)
    left: list[TwoCycle] = []
    right: list[TwoCycle] = []
    for start in range(n):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        nxt = int(perm[start])
        while nxt != start:
            cyc.append(nxt)
            seen[nxt] = True
            nxt = int(perm[nxt])
        ell = len(cyc)
        for i in range(1, (ell - 1) // 2 + 1):
            right.append(TwoCycle(cyc[i], cyc[ell - i]))
        for i in range(1, ell // 2 + 1):
            left.append(TwoCycle(cyc[i], cyc[(1 - i) % ell]))
    return TwoCycleSet(left), TwoCycleSet(right)


def compose_involutions(left: TwoCycleSet, right: TwoCycleSet, n: int) -> np.ndarray:
    """Permutation array of ``L o R`` (apply ``right`` first)."""

    def as_map(cs: TwoCycleSet) -> np.ndarray:
        p = np.arange(n)
        for c in cs:
            p[c.a], p[c.b] = c.b, c.a
        return p

    return as_map(left)[as_map(right)]
