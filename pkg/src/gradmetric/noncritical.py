"""Pointwise metric at points where the co-vector does not vanish.

With a dual frame whose first co-vector is ``y`` itself, the frame
coordinates of ``y`` are ``(1, 0, ..., 0)``.  Writing ``x`` in the dual basis
as ``(X1, Xbar)``, the block matrix

    G = [[X1, Xbar^T], [Xbar, f I]],   f = X1/2 + 2 |Xbar|^2 / X1,

maps ``(1, 0, ..., 0)`` to ``(X1, Xbar)`` and satisfies ``G >= (X1/2) I``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NonPositivePairing, ZeroCovector

PAIRING_TOL = 1e-12
FRAME_COND_BOUND = 1e10


@dataclass(frozen=True, eq=False)
class DualFrame:
    """Rows ``e^1..e^n`` of co-vectors; ``e^1`` is the input co-vector."""

    rows: np.ndarray

    @property
    def dim(self):
        return self.rows.shape[0]

    def inverse(self):
        return np.linalg.inv(self.rows)


@dataclass(frozen=True, eq=False)
class LocalMetricPoint:
    point: np.ndarray
    G: np.ndarray
    G_std: np.ndarray
    X1: float
    frame: DualFrame = None


def complete_dual_frame(y):
    """Householder completion of ``y`` to a basis of co-vectors.

    The reflection ``H`` maps ``y/|y|`` to the first standard co-vector; the
    rows of ``H`` other than the first are orthonormal and orthogonal to
    ``y``, and the first row is replaced by ``y`` itself (not normalised).
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(y))
    if norm == 0.0 or not np.isfinite(norm):
        raise ZeroCovector("cannot complete a zero co-vector to a frame")
    n = y.size
    u = y / norm
    v = u.copy()
    v[0] += np.copysign(1.0, u[0]) if u[0] != 0 else 1.0
    H = np.eye(n) - 2.0 * np.outer(v, v) / float(v @ v)
    rows = H.copy()
    rows[0] = y
    return DualFrame(rows)


def build_noncritical_metric(x_val, y_val, point=None, pairing_tol=PAIRING_TOL):
    """Symmetric positive-definite ``G_std`` with ``G_std @ y_val == x_val``."""
    x = np.asarray(x_val, dtype=float).reshape(-1)
    y = np.asarray(y_val, dtype=float).reshape(-1)
    pairing = float(x @ y)
    if not pairing > pairing_tol * np.linalg.norm(x) * np.linalg.norm(y) or pairing <= 0:
        raise NonPositivePairing(f"<X, Y> = {pairing:.3e} is not positive",
                                 point if point is not None else None, pairing)
    frame = complete_dual_frame(y)
    E = frame.rows
    # coordinates of x in the basis dual to the rows of E
    coords = E @ x
    X1 = float(coords[0])
    Xbar = coords[1:]
    f = X1 / 2.0 + (2.0 / X1) * float(Xbar @ Xbar)
    n = x.size
    G = np.empty((n, n))
    G[0, 0] = X1
    G[0, 1:] = Xbar
    G[1:, 0] = Xbar
    G[1:, 1:] = f * np.eye(n - 1)
    Einv = np.linalg.inv(E)
    G_std = Einv @ G @ Einv.T
    G_std = 0.5 * (G_std + G_std.T)
    return LocalMetricPoint(None if point is None else np.asarray(point, dtype=float),
                            G, G_std, X1, frame)


def noncritical_metric_field(x_vals, y_vals, pairing_tol=PAIRING_TOL):
    """Vectorised ``G_std`` for arrays of values of shape ``(..., n)``."""
    x = np.asarray(x_vals, dtype=float)
    y = np.asarray(y_vals, dtype=float)
    lead = x.shape[:-1]
    n = x.shape[-1]
    xf = x.reshape(-1, n)
    yf = y.reshape(-1, n)
    out = np.empty((xf.shape[0], n, n))
    for i in range(xf.shape[0]):
        out[i] = build_noncritical_metric(xf[i], yf[i], pairing_tol=pairing_tol).G_std
    return out.reshape(lead + (n, n))
