"""Closed-form solutions of the symmetric tensor equations of the hierarchy.

For an invertible form ``U_{ab}`` and ``R^a_{c1..cN}`` symmetric in its lower
indices, we look for ``T^{ab}_{c1..c(N-1)}`` symmetric in the upper pair and
in the lower group with

    sum_i U_{c_i b} T^{ab}_{c1..(c_i omitted)..cN} = R^a_{c1..cN}.

:func:`solve_orderN` returns the explicit solution; :func:`brute_force_solve`
is an independent least-squares route used as an oracle.
"""
import numpy as np

from .errors import InvalidContraction, InvalidOrder, ProblemTooLarge
from .multiindex import homogeneous, index_table, orbit_ids, sequence_of
from .tensor_core import (DEFAULT_COND_BOUND, Bilinear, MultiTensor,
                          invert_bilinear, orbit_average, sup_norm)

MAX_BRUTE_FORCE_UNKNOWNS = 5000


def _as_array(u):
    return u.entries if isinstance(u, (Bilinear, MultiTensor)) else np.asarray(u, dtype=float)


def _check_R(R, N):
    if R.variance != ("u",) + ("l",) * N:
        raise InvalidContraction(f"R must have 1 upper and {N} lower indices, "
                                 f"got {''.join(R.variance)}")


def _symmetric_T(t):
    """Enforce exact symmetry in the upper pair and in all lower indices."""
    k = t.ndim - 2
    t = orbit_average(t, k)
    t = 0.5 * (t + np.swapaxes(t, 0, 1))
    return MultiTensor(t, ("u", "u") + ("l",) * k,
                       ((0, 1),) + ((tuple(range(2, 2 + k)),) if k > 1 else ()))


def scale_of(U, R, T):
    """Reference magnitude for residual tolerances."""
    return max(1.0, sup_norm(R), sup_norm(U) * sup_norm(T))


def solve_order2(U, R, cond_bound=DEFAULT_COND_BOUND):
    """Order-two solution written out index by index.

    T^{ab}_c = 1/2 (U^{bd} R^a_{cd} + U^{ad} R^b_{cd} - U_{cg} U^{aa'} U^{bb'} R^g_{a'b'})
    """
    _check_R(R, 2)
    u = _as_array(U)
    ui = invert_bilinear(U, cond_bound).entries
    r = R.entries
    t = 0.5 * (np.einsum("bd,acd->abc", ui, r)
               + np.einsum("ad,bcd->abc", ui, r)
               - np.einsum("cg,ap,bq,gpq->abc", u, ui, ui, r))
    return _symmetric_T(t)


def solve_orderN(U, R, cond_bound=DEFAULT_COND_BOUND):
    """Explicit solution of the order-N equation.

    Parameters
    ----------
    U : Bilinear
        The invertible form ``U_{ab}``.
    R : MultiTensor
        One upper and ``N >= 2`` lower indices, symmetric in the lower ones.

    Returns
    -------
    MultiTensor
        ``T`` with two upper and ``N - 1`` lower indices::

            T = 1/N ( U^{bd} R^a_{d g..} + U^{ad} R^b_{d g..}
                      - 1/(N-1) sum_i U_{g_i g'} U^{aa'} U^{bb'} R^{g'}_{a'b' g..(g_i omitted)} )
    """
    N = R.lower_rank
    if N < 2:
        raise InvalidOrder(f"order must be at least 2, got {N}")
    _check_R(R, N)
    u = _as_array(U)
    ui = invert_bilinear(U, cond_bound).entries
    r = R.entries
    n = r.shape[0]
    first = np.tensordot(ui, r, axes=([1], [1]))          # (b, a, g...)
    first = np.swapaxes(first, 0, 1)                      # (a, b, g...)
    both = first + np.swapaxes(first, 0, 1)
    # W[g', a, b, rest] = U^{aa'} U^{bb'} R^{g'}_{a'b' rest}
    w = np.tensordot(ui, r, axes=([1], [1]))              # (a, g', b', rest)
    w = np.tensordot(ui, w, axes=([1], [2]))              # (b, a, g', rest)
    w = np.tensordot(u, w, axes=([1], [2]))               # (g, b, a, rest)
    v = np.moveaxis(w, 0, 2)                              # (b, a, g, rest)
    v = np.swapaxes(v, 0, 1)                              # (a, b, g, rest)
    third = np.zeros_like(both)
    for i in range(N - 1):
        third = third + np.moveaxis(v, 2, 2 + i)
    t = (both - third / (N - 1)) / N
    assert t.shape == (n,) * (N + 1)
    return _symmetric_T(t)


def lhs_operator(U, T):
    """``L(T)^a_{c1..cN} = sum_i U_{c_i b} T^{ab}_{c1..(c_i omitted)..cN}``."""
    u = _as_array(U)
    t = T.entries if isinstance(T, MultiTensor) else np.asarray(T, dtype=float)
    k = t.ndim - 2
    N = k + 1
    v = np.tensordot(t, u, axes=([1], [1]))               # (a, rest, g)
    v = np.moveaxis(v, -1, 1)                             # (a, g, rest)
    out = np.zeros((t.shape[0],) * (N + 1))
    for i in range(N):
        out = out + np.moveaxis(v, 1, 1 + i)
    return out


def equation_residual(U, T, R, N):
    """Sup norm of ``L(T) - R`` for the order-N equation."""
    if R.variance != ("u",) + ("l",) * N:
        raise InvalidContraction(f"R has variance {''.join(R.variance)}, expected order {N}")
    if T.variance != ("u", "u") + ("l",) * (N - 1):
        raise InvalidContraction(f"T has variance {''.join(T.variance)}, expected order {N}")
    u = _as_array(U)
    if u.shape != (T.dim, T.dim) or R.dim != T.dim:
        raise InvalidContraction("dimension mismatch between U, T and R")
    return sup_norm(lhs_operator(u, T) - R.entries)


def brute_force_solve(U, R):
    """Least-squares solve over the space of doubly symmetric tensors.

    The unknowns are the canonical entries ``T^{pq}_{seq(j)}`` with ``p <= q``
    and ``|j| = N - 1``; one equation per ``(a, m)`` with ``|m| = N``.  Dense
    ``numpy.linalg.lstsq`` returns the minimum-norm solution.
    """
    N = R.lower_rank
    if N < 2:
        raise InvalidOrder(f"order must be at least 2, got {N}")
    _check_R(R, N)
    u = _as_array(U)
    n = u.shape[0]
    lower = homogeneous(n, N - 1)
    lower_pos = index_table(n, N - 1)
    offset = len(lower_pos) - len(lower)
    pairs = [(p, q) for p in range(n) for q in range(p, n)]
    pair_pos = {pq: i for i, pq in enumerate(pairs)}
    n_unknowns = len(pairs) * len(lower)
    if n_unknowns > MAX_BRUTE_FORCE_UNKNOWNS:
        raise ProblemTooLarge(f"{n_unknowns} unknowns exceed {MAX_BRUTE_FORCE_UNKNOWNS}")
    rows = homogeneous(n, N)
    A = np.zeros((n * len(rows), n_unknowns))
    rhs = np.zeros(n * len(rows))
    r = R.entries
    for a in range(n):
        for k, m in enumerate(rows):
            row = a * len(rows) + k
            rhs[row] = r[(a,) + sequence_of(m)]
            for c in range(n):
                if m[c] == 0:
                    continue
                j = list(m)
                j[c] -= 1
                col_j = lower_pos[tuple(j)] - offset
                for b in range(n):
                    pq = pair_pos[(min(a, b), max(a, b))]
                    A[row, pq * len(lower) + col_j] += m[c] * u[c, b]
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    t = np.zeros((n,) * (N + 1))
    ids, _ = orbit_ids(n, N - 1)
    coeff = sol.reshape(len(pairs), len(lower))
    for (p, q), i in pair_pos.items():
        block = coeff[i][ids].reshape((n,) * (N - 1))
        t[p, q] = block
        t[q, p] = block
    return MultiTensor(t, ("u", "u") + ("l",) * (N - 1))
