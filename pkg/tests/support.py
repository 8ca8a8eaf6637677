"""Shared builders and independent reference implementations for the tests."""
from itertools import combinations, permutations, product
from math import factorial

import numpy as np

from gradmetric.jets import Domain, FieldPair, Jet, jet_multiply
from gradmetric.multiindex import multi_indices
from gradmetric.tensor_core import MultiTensor, symmetrize


def random_symmetric_R(rng, n, N):
    raw = MultiTensor.from_array(rng.normal(size=(n,) * (N + 1)), 1, N)
    return symmetrize(raw, range(1, N + 1))


def random_U(rng, n):
    return rng.normal(size=(n, n)) + n * np.eye(n)


def permutation_average(a, axes):
    """Average over every permutation of ``axes`` by explicit enumeration."""
    axes = list(axes)
    total = np.zeros_like(a, dtype=float)
    perms = list(permutations(axes))
    for p in perms:
        order = list(range(a.ndim))
        for src, dst in zip(axes, p):
            order[src] = dst
        total = total + np.transpose(a, order)
    return total / len(perms)


def naive_lhs(U, T, N):
    """``sum_i U[c_i, b] T[a, b, c minus c_i]`` by loops over all index tuples."""
    n = U.shape[0]
    out = np.zeros((n,) * (N + 1))
    for a in range(n):
        for cs in product(range(n), repeat=N):
            s = 0.0
            for i in range(N):
                rest = cs[:i] + cs[i + 1:]
                for b in range(n):
                    s += U[cs[i], b] * T[(a, b) + rest]
            out[(a,) + cs] = s
    return out


def dense_derivative(jet, seq):
    """``d_{seq} jet`` at the base point from the coefficient table."""
    n = jet.dim
    m = [0] * n
    for c in seq:
        m[c] += 1
    coef = jet.coeff(tuple(m)) if sum(m) <= jet.order else 0.0
    f = 1
    for k in m:
        f *= factorial(k)
    return f * coef


def subset_R(N, fp, Ts):
    """Right-hand side by explicit enumeration of all subsets ``S`` of ``[N]``."""
    n = fp.dim
    R = np.zeros((n,) * (N + 1))
    for a in range(n):
        for cs in product(range(n), repeat=N):
            val = dense_derivative(fp.X[a], cs)
            for size in range(N - 1):
                for S in combinations(range(N), size):
                    rest = tuple(cs[i] for i in range(N) if i not in S)
                    lower = tuple(cs[i] for i in S)
                    for b in range(n):
                        val -= Ts[size][(a, b) + lower] * dense_derivative(fp.Y[b], rest)
            R[(a,) + cs] = val
    return R


def manufactured_pair(n, rng, order, ydeg=3, gdeg=2, domain=None, yscale=0.2, gscale=0.1):
    """Polynomial ``Y`` with invertible linear part, polynomial PD ``g*``, ``X = g* Y``.

    Returns the field pair and the jets of ``g*``.
    """
    M = len(multi_indices(n, order))

    def poly(deg, scale):
        c = np.zeros(M)
        m = len(multi_indices(n, min(deg, order)))
        c[:m] = rng.normal(size=m) * scale
        return c

    L = rng.normal(size=(n, n)) * 0.3 + np.eye(n)
    Y = []
    for b in range(n):
        c = poly(ydeg, yscale)
        c[0] = 0.0
        c[1:n + 1] = L[b]
        Y.append(Jet(n, order, np.zeros(n), c))
    g = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(a, n):
            c = poly(gdeg, gscale)
            c[0] = 1.0 if a == b else 0.1 / n
            g[a][b] = g[b][a] = Jet(n, order, np.zeros(n), c)
    X = []
    for a in range(n):
        acc = jet_multiply(g[a][0], Y[0])
        for b in range(1, n):
            acc = acc + jet_multiply(g[a][b], Y[b])
        X.append(acc)
    return FieldPair(n, tuple(X), tuple(Y), domain), g


def box(n, half=0.5):
    return Domain.box(-half * np.ones(n), half * np.ones(n))


def series_quotient(x, y, K):
    """Power-series coefficients of ``x(t)/y(t)`` when ``y(0) = x(0) = 0``.

    ``x``, ``y`` are coefficient lists; the quotient has coefficients ``q``
    with ``x = q * y``, solved by forward substitution.
    """
    q = np.zeros(K + 1)
    for k in range(K + 1):
        s = x[k + 1] if k + 1 < len(x) else 0.0
        for j in range(k):
            s -= q[j] * (y[k + 1 - j] if k + 1 - j < len(y) else 0.0)
        q[k] = s / y[1]
    return q


# acceptance criterion number -> (passed, detail); printed in the terminal summary
ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(acceptance_line(number))
    return bool(passed)


def acceptance_line(number):
    passed, detail = ACCEPTANCE[number]
    return f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
