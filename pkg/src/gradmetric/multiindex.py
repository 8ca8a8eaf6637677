"""Multi-index bookkeeping shared by jets and symmetric tensors.

Canonical order is graded lexicographic: total degree ascending, and within a
degree the exponent tuples in descending lexicographic order, e.g. for n=2:
(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...  This coincides with the order
in which ``itertools.combinations_with_replacement`` emits sorted index
sequences, which is what ties the dense (index-sequence) and compressed
(exponent) views of symmetric tensors together.
"""
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb, factorial, prod

import numpy as np


@lru_cache(maxsize=None)
def homogeneous(n, degree):
    """Exponent tuples of total ``degree`` in canonical order."""
    out = []
    for seq in combinations_with_replacement(range(n), degree):
        counts = [0] * n
        for c in seq:
            counts[c] += 1
        out.append(tuple(counts))
    return tuple(out)


@lru_cache(maxsize=None)
def multi_indices(n, order):
    """All exponent tuples with total degree <= ``order``, canonical order."""
    out = []
    for d in range(order + 1):
        out.extend(homogeneous(n, d))
    return tuple(out)


@lru_cache(maxsize=None)
def index_table(n, order):
    """Map exponent tuple -> position in ``multi_indices(n, order)``."""
    return {m: i for i, m in enumerate(multi_indices(n, order))}


def count_monomials(n, order):
    return comb(n + order, order)


def mfactorial(m):
    return prod(factorial(k) for k in m)


def multinomial(m):
    return factorial(sum(m)) // mfactorial(m)


def sequence_of(m):
    """Sorted index sequence with exponent counts ``m``."""
    seq = []
    for c, k in enumerate(m):
        seq.extend([c] * k)
    return tuple(seq)


@lru_cache(maxsize=None)
def _orbit_ids(n, N):
    if N == 0:
        ids = np.zeros(1, dtype=np.intp)
        reps = np.zeros(1, dtype=np.intp)
        ids.setflags(write=False)
        reps.setflags(write=False)
        return ids, reps
    grids = np.indices((n,) * N).reshape(N, -1)
    counts = np.zeros((n, grids.shape[1]), dtype=np.int64)
    for axis in range(N):
        np.add.at(counts, (grids[axis], np.arange(grids.shape[1])), 1)
    base = N + 1
    weights = base ** np.arange(n, dtype=np.int64)
    keys = weights @ counts
    table = homogeneous(n, N)
    table_keys = np.array([sum(k * base**i for i, k in enumerate(m)) for m in table],
                          dtype=np.int64)
    order = np.argsort(table_keys)
    ids = order[np.searchsorted(table_keys[order], keys)]
    # flat dense position of the sorted sequence for each exponent tuple
    reps = np.array([np.ravel_multi_index(sequence_of(m), (n,) * N) for m in table],
                    dtype=np.intp)
    ids = ids.astype(np.intp)
    ids.setflags(write=False)
    reps.setflags(write=False)
    return ids, reps


def orbit_ids(n, N):
    """For the ``n**N`` index sequences (C order), the canonical position of
    their exponent tuple within ``homogeneous(n, N)``; plus, per exponent
    tuple, the flat position of its sorted representative sequence."""
    return _orbit_ids(n, N)
