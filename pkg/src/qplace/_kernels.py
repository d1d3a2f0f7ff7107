"""Compiled inner loops for the QUBO solvers."""
import numpy as np
from numba import njit


@njit(cache=True)
def gray_enumerate(q):
    """Exact minimum of ``x^T q x`` over all binary ``x``.

    Variable ``i`` is bit ``d - 1 - i`` of the Gray code, so comparing codes
    as integers compares ``x`` lexicographically; ties keep the smaller code.
    Returns the best code.
    """
    d = q.shape[0]
    x = np.zeros(d, dtype=np.int8)
    field = np.zeros(d)  # q @ x
    energy = 0.0
    best = 0.0
    best_code = 0
    code = 0
    total = 1 << d
    for step in range(1, total):
        bit = 0
        t = step
        while (t & 1) == 0:
            t >>= 1
            bit += 1
        var = d - 1 - bit
        if x[var] == 0:
            delta = q[var, var] + 2.0 * field[var]
            x[var] = 1
            sign = 1.0
        else:
            delta = -(2.0 * field[var] - q[var, var])
            x[var] = 0
            sign = -1.0
        energy += delta
        for j in range(d):
            field[j] += sign * q[j, var]
        code ^= 1 << bit
        if energy < best or (energy == best and code < best_code):
            best = energy
            best_code = code
    return best_code


@njit(cache=True)
def anneal(q, betas, seeds):
    """Single-flip Metropolis annealing, one read per seed.

    Returns the final state of every read as a ``(reads, d)`` int8 array.
    """
    d = q.shape[0]
    reads = seeds.shape[0]
    out = np.zeros((reads, d), dtype=np.int8)
    diag = np.empty(d)
    for i in range(d):
        diag[i] = q[i, i]
    for r in range(reads):
        np.random.seed(seeds[r])
        x = np.zeros(d, dtype=np.int8)
        for i in range(d):
            if np.random.random() < 0.5:
                x[i] = 1
        field = np.zeros(d)
        for i in range(d):
            if x[i] == 1:
                for j in range(d):
                    field[j] += q[j, i]
        for beta in betas:
            order = np.random.permutation(d)
            for t in range(d):
                i = order[t]
                # energy change of flipping i; field includes q[i,i] x[i]
                if x[i] == 0:
                    delta = diag[i] + 2.0 * field[i]
                else:
                    delta = diag[i] - 2.0 * field[i]
                if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                    if x[i] == 0:
                        x[i] = 1
                        for j in range(d):
                            field[j] += q[j, i]
                    else:
                        x[i] = 0
                        for j in range(d):
                            field[j] -= q[j, i]
        out[r] = x
    return out
