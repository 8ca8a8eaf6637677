"""Power-series construction of the inverse metric around a critical point.

Index conventions are fixed here and only here.  At the base point ``x0``

    A[c, a] = d_c X^a,        U[c, b] = d_c Y_b,

i.e. rows carry the differentiation index.  The first-order condition
``d_c X^a = gbar^{ab} d_c Y_b`` then reads ``A = U @ Gbar``, so the base
scalar product is ``Gbar = U^{-1} A`` (it has to come out symmetric and
positive definite for a solution to exist).

Higher coefficients ``T_N = d_{c1}..d_{cN} g^{ab}`` at ``x0`` are produced
order by order: ``R_N`` collects everything already known and
``solve_orderN(U, R_N)`` gives ``T_{N-1}``.
"""
import json
import warnings
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .errors import ConditionThreeViolated, NotCritical, OrderExceeded
from .jets import (DEFAULT_CRITICAL_TOL, Jet, _product_table, derivative_tensor,
                   jet_multiply, monomial_values)
from .multiindex import homogeneous, mfactorial, multi_indices, orbit_ids
from .tensor_core import (DEFAULT_COND_BOUND, Bilinear, MultiTensor,
                          invert_bilinear, sup_norm)
from .tensor_solver import solve_orderN

ASYM_TOL = 1e-8
EIG_TOL = 1e-10
GROWTH_RESIDUAL_BOUND = 2.0
ZERO_COEFF_TOL = 1e-12


class RadiusWarning(UserWarning):
    """Series evaluated outside its estimated convergence region."""


@dataclass(frozen=True, eq=False)
class BaseMetricResult:
    exists: bool
    g_bar: np.ndarray
    asym_defect: float
    min_eigenvalue: float
    G: np.ndarray = None

    def to_dict(self):
        return {"exists": self.exists,
                "asym_defect": self.asym_defect,
                "min_eigenvalue": self.min_eigenvalue,
                "g_bar": None if self.g_bar is None else self.g_bar.tolist()}


@dataclass(frozen=True)
class GrowthFit:
    C: float
    p: float
    C_fit: float = 0.0
    residual: float = 0.0
    flags: tuple = ()

    def to_dict(self):
        return {"C": self.C, "p": self.p, "C_fit": self.C_fit,
                "residual": self.residual, "flags": list(self.flags)}


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """Coefficients ``T_N`` (``N = 0..order``) of ``g^{ab}`` around ``base_point``."""

    dim: int
    base_point: np.ndarray
    order: int
    coeffs: tuple
    growth: GrowthFit = None
    base_result: BaseMetricResult = field(default=None, repr=False)

    @property
    def g_bar(self):
        return self.coeffs[0].entries

    def coefficient_array(self):
        """``(n, n, M)`` monomial coefficients: ``T_N[a, b, seq(m)] / m!``."""
        n = self.dim
        blocks = []
        for N, t in enumerate(self.coeffs):
            _, reps = orbit_ids(n, N)
            flat = t.entries.reshape(n, n, n**N)
            scale = np.array([mfactorial(m) for m in homogeneous(n, N)], dtype=float)
            blocks.append(flat[:, :, reps] / scale)
        return np.concatenate(blocks, axis=-1)

    def jets(self, order=None):
        """``n x n`` nested tuple of :class:`Jet` entries of ``g^{ab}``."""
        order = self.order if order is None else order
        c = self.coefficient_array()
        out = []
        for a in range(self.dim):
            row = []
            for b in range(self.dim):
                j = Jet(self.dim, self.order, self.base_point, c[a, b])
                row.append(j.padded(order) if order > self.order else j.truncated(order))
            out.append(tuple(row))
        return tuple(out)

    def with_growth(self, growth):
        return MetricSeries(self.dim, self.base_point, self.order, self.coeffs,
                            growth, self.base_result)

    def truncated(self, order):
        return MetricSeries(self.dim, self.base_point, min(order, self.order),
                            self.coeffs[:order + 1], self.growth, self.base_result)

    def to_dict(self):
        n = self.dim
        coeffs = []
        for N, t in enumerate(self.coeffs):
            _, reps = orbit_ids(n, N)
            coeffs.append(t.entries.reshape(n, n, n**N)[:, :, reps].ravel().tolist())
        return {"dim": n, "base_point": self.base_point.tolist(), "order": self.order,
                "coeffs": coeffs,
                "growth": None if self.growth is None else self.growth.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        n, order = int(doc["dim"]), int(doc["order"])
        coeffs = []
        for N, flat in enumerate(doc["coeffs"]):
            ids, _ = orbit_ids(n, N)
            block = np.asarray(flat, dtype=float).reshape(n, n, -1)
            coeffs.append(MultiTensor(block[:, :, ids].reshape((n,) * (N + 2)),
                                      ("u", "u") + ("l",) * N))
        g = doc.get("growth")
        growth = None if g is None else GrowthFit(g["C"], g["p"], g["C_fit"], g["residual"],
                                                 tuple(g["flags"]))
        return cls(n, np.asarray(doc["base_point"], dtype=float), order, tuple(coeffs), growth)

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def first_derivatives(jets):
    """``D[c, a] = d_c jets[a]`` at the common base point."""
    n = len(jets)
    return np.array([[derivative_tensor(jets[a], 1)[c] for a in range(n)] for c in range(n)])


def solve_base_metric(A, U, asym_tol=ASYM_TOL, eig_tol=EIG_TOL, cond_bound=DEFAULT_COND_BOUND):
    """Find the symmetric positive-definite ``Gbar`` with ``A = U @ Gbar``, if any.

    ``exists=False`` is a certificate that no such scalar product exists:
    either ``U^{-1} A`` is not symmetric (``asym_defect`` large) or its
    symmetric part is not positive definite.
    """
    a = A.entries if isinstance(A, Bilinear) else np.asarray(A, dtype=float)
    u = U.entries if isinstance(U, Bilinear) else np.asarray(U, dtype=float)
    invert_bilinear(u, cond_bound)  # raises DegenerateForm
    G = np.linalg.solve(u, a)
    asym = float(np.max(np.abs(G - G.T))) if G.size else 0.0
    sym = 0.5 * (G + G.T)
    min_eig = float(np.min(np.linalg.eigvalsh(sym)))
    exists = asym <= asym_tol * max(sup_norm(G), np.finfo(float).tiny) and min_eig > eig_tol
    return BaseMetricResult(bool(exists), sym if exists else None, asym, min_eig, G)


def build_R_tensor(N, fp, series):
    """Right-hand side of the order-N equation from the fields and ``T_0..T_{N-2}``.

    Evaluated on the monomial coefficients: the subset sum over ``S`` with
    ``|S| < N-1`` is the degree-N part of the Cauchy product of the known
    metric coefficients with ``Y``.  The dense result is exactly symmetric.
    """
    if fp.order < N:
        raise OrderExceeded(f"fields have order {fp.order}, order {N} needed")
    if len(series) < N - 1:
        raise ValueError(f"need coefficients T_0..T_{N - 2}, got {len(series)}")
    n = fp.dim
    M = len(multi_indices(n, N))
    lo = len(multi_indices(n, N - 1))
    G = np.zeros((n, n, M))
    for k, t in enumerate(series[:N - 1]):
        _, reps = orbit_ids(n, k)
        scale = np.array([mfactorial(m) for m in homogeneous(n, k)], dtype=float)
        start = len(multi_indices(n, k - 1)) if k else 0
        G[:, :, start:start + len(scale)] = t.entries.reshape(n, n, n**k)[:, :, reps] / scale
    Yc = np.array([j.truncated(N).coeffs for j in fp.Y])       # (n, M)
    Xc = np.array([j.degree_block(N) for j in fp.X])            # (n, M_N)
    ia, ib, ic = _product_table(n, N)
    keep = ic >= lo
    ia, ib, ic = ia[keep], ib[keep], ic[keep] - lo
    prod = np.zeros((n, M - lo))
    for a in range(n):
        w = np.einsum("bt,bt->t", G[a][:, ia], Yc[:, ib])
        prod[a] = np.bincount(ic, weights=w, minlength=M - lo)
    rhat = Xc - prod
    scale = np.array([mfactorial(m) for m in homogeneous(n, N)], dtype=float)
    ids, _ = orbit_ids(n, N)
    dense = (rhat * scale)[:, ids].reshape((n,) * (N + 1))
    return MultiTensor(dense, ("u",) + ("l",) * N, (tuple(range(1, N + 1)),))


def check_critical(fp, tol=DEFAULT_CRITICAL_TOL):
    x0 = fp.base_point
    xn = float(np.linalg.norm(fp.eval_X(x0)))
    yn = float(np.linalg.norm(fp.eval_Y(x0)))
    if yn > tol:
        raise NotCritical(f"|Y(x0)| = {yn:.3e} > {tol:.1e}: base point is not critical",
                          xn, yn)
    if xn > tol:
        raise NotCritical(f"|X(x0)| = {xn:.3e} > {tol:.1e} while Y(x0) = 0", xn, yn)


def build_metric_series(fp, K, tol=DEFAULT_CRITICAL_TOL, asym_tol=ASYM_TOL, eig_tol=EIG_TOL,
                        cond_bound=DEFAULT_COND_BOUND, fit=True):
    """Coefficients ``T_0..T_K`` of ``g^{ab}`` around the critical point ``fp.base_point``.

    The fields must be expanded at the critical point with jets of order at
    least ``K + 1``.
    """
    if fp.order < K + 1:
        raise OrderExceeded(f"order-{K} series needs field jets of order {K + 1}, "
                            f"got {fp.order}")
    check_critical(fp, tol)
    A = first_derivatives(fp.X)
    U = first_derivatives(fp.Y)
    base = solve_base_metric(A, U, asym_tol, eig_tol, cond_bound)
    if not base.exists:
        raise ConditionThreeViolated(
            f"no scalar product intertwines dX and dY at {fp.base_point.tolist()}: "
            f"asym_defect={base.asym_defect:.3e}, min_eigenvalue={base.min_eigenvalue:.3e}",
            base)
    Uform = Bilinear(U)
    coeffs = [MultiTensor(base.g_bar, ("u", "u"), ((0, 1),))]
    for N in range(2, K + 2):
        R = build_R_tensor(N, fp, coeffs)
        coeffs.append(solve_orderN(Uform, R, cond_bound))
    ms = MetricSeries(fp.dim, fp.base_point, K, tuple(coeffs), None, base)
    if fit and K >= 3:
        ms = ms.with_growth(fit_growth(ms))
    return ms


def fit_growth(ms, residual_bound=GROWTH_RESIDUAL_BOUND, zero_tol=ZERO_COEFF_TOL):
    """Fit ``log(t_N / N!) ~ log C + N log p`` over ``N = 1..K``.

    ``t_N`` is the sup norm of ``T_N``.  An order counts as an exact zero, and
    is left out of the fit, when ``t_N / N!`` (the size of its monomial
    coefficients, where rounding noise lives) is below ``zero_tol * max(1, t_0)``.
    The returned ``C`` is raised, if needed, so that ``t_N <= C N! p^N`` holds for
    every ``N`` (``C_fit`` keeps the least-squares intercept).  The residual is
    the RMS of the log-residuals.
    """
    if ms.order < 3:
        raise ValueError("growth fit needs order >= 3")
    t = np.array([sup_norm(c) for c in ms.coeffs])
    floor = zero_tol * max(1.0, t[0])
    Ns = np.arange(1, ms.order + 1)
    tn = t[1:]
    fact = np.array([float(factorial(int(N))) for N in Ns])
    nz = tn / fact > floor
    if not np.any(nz):
        return GrowthFit(0.0, 0.0, 0.0, 0.0, ("ExactPolynomial",))
    flags = []
    if not nz[-1]:
        flags.append("ExactPolynomial")
    y = np.log(tn[nz] / fact[nz])
    x = Ns[nz].astype(float)
    if x.size >= 2:
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (intercept + slope * x)
        rms = float(np.sqrt(np.mean(resid**2)))
    else:
        slope, intercept, rms = y[0] / x[0], 0.0, 0.0
    p = float(np.exp(slope))
    C_fit = float(np.exp(intercept))
    ratios = [tn[i] / (factorial(int(N)) * p**int(N)) for i, N in enumerate(Ns)]
    C = max(C_fit, max(ratios))
    if rms > residual_bound:
        flags.append("NonGeometricGrowth")
    return GrowthFit(float(C), p, C_fit, rms, tuple(flags))


def convergence_radius_l1(ms):
    """``1 / (p n)`` from the fitted growth (``inf`` when the series terminates)."""
    g = ms.growth
    if g is None or g.p <= 0 or "ExactPolynomial" in g.flags:
        return np.inf
    return 1.0 / (g.p * ms.dim)


def eval_metric_series(ms, x, warn=True):
    """``g^{ab}(x) = sum_N 1/N! T_N (x - x0)^N`` for points ``x`` of shape ``(..., n)``.

    The sum runs over monomials in canonical order, so equal coefficients
    give bit-identical entries and the result is exactly symmetric.
    """
    x = np.asarray(x, dtype=float)
    dx = x - ms.base_point
    if warn:
        r = convergence_radius_l1(ms)
        if np.isfinite(r) and np.any(np.sum(np.abs(dx), axis=-1) >= r):
            warnings.warn(f"evaluating outside the l1 radius {r:.3e} of the series",
                          RadiusWarning, stacklevel=2)
    c = ms.coefficient_array()
    lead = dx.shape[:-1]
    acc = np.zeros(lead + (ms.dim, ms.dim))
    for k, mono in enumerate(monomial_values(dx, ms.order)):
        acc = acc + c[:, :, k] * mono[..., None, None]
    return acc


def coefficient_scale(ms, fp):
    cx = max(float(np.max(np.abs(j.coeffs))) for j in fp.X)
    cy = max(float(np.max(np.abs(j.coeffs))) for j in fp.Y)
    cg = float(np.max(np.abs(ms.coefficient_array())))
    return max(1.0, cx, cy * cg)


def verify_order(ms, fp, K=None):
    """Largest coefficient of the jet ``g^{ab} Y_b - X^a`` up to total degree ``K``.

    Zero in exact arithmetic for ``K <= ms.order + 1``.
    """
    K = ms.order + 1 if K is None else K
    if fp.order < K:
        raise OrderExceeded(f"field jets have order {fp.order}, verification needs {K}")
    if not np.array_equal(fp.base_point, ms.base_point):
        raise ValueError("series and fields are expanded around different points")
    g = ms.jets(K)
    worst = 0.0
    for a in range(ms.dim):
        acc = fp.X[a].truncated(K) * -1.0
        for b in range(ms.dim):
            acc = acc + jet_multiply(g[a][b], fp.Y[b].truncated(K))
        worst = max(worst, float(np.max(np.abs(acc.coeffs))))
    return worst


def _ray_directions(n, count, seed):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    eye = np.eye(n)
    rng = np.random.default_rng(seed)
    extra = rng.normal(size=(count, n))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.concatenate([eye, -eye, extra])


def first_failure_radius(predicate, directions, center, max_radius, steps=64, iters=50):
    """Smallest radius along the rays ``center + r u`` where ``predicate`` fails.

    ``predicate`` maps an array of points ``(m, n)`` to booleans.  All rays are
    scanned on ``steps`` points, then the first failing bracket of every ray
    is bisected (rays are processed together).  Returns ``max_radius`` when no
    ray fails.
    """
    center = np.asarray(center, dtype=float)
    directions = np.asarray(directions, dtype=float)
    ts = np.linspace(0.0, max_radius, steps + 1)[1:]
    pts = center + ts[None, :, None] * directions[:, None, :]
    ok = np.asarray(predicate(pts.reshape(-1, center.size))).reshape(len(directions), steps)
    failing = ~np.all(ok, axis=1)
    if not np.any(failing):
        return float(max_radius)
    u = directions[failing]
    first = np.argmin(ok[failing], axis=1)
    lo = np.where(first > 0, ts[np.maximum(first - 1, 0)], 0.0)
    hi = ts[first]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        good = np.asarray(predicate(center + mid[:, None] * u))
        lo = np.where(good, mid, lo)
        hi = np.where(good, hi, mid)
    return float(min(max_radius, np.min(lo)))


def check_positivity_region(ms, max_radius, n_directions=32, steps=64, seed=0,
                            eig_tol=0.0):
    """Radius of the largest sampled ball around the base point on which the
    truncated series stays positive definite."""
    if np.min(np.linalg.eigvalsh(ms.g_bar)) <= eig_tol:
        raise ConditionThreeViolated("base metric is not positive definite", ms.base_result)

    def positive(points):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RadiusWarning)
            g = eval_metric_series(ms, points)
        return np.linalg.eigvalsh(g)[..., 0] > eig_tol

    dirs = _ray_directions(ms.dim, n_directions, seed)
    return first_failure_radius(positive, dirs, ms.base_point, max_radius, steps)


def binomial_subset_check(N):
    """Number of subsets ``S`` of ``[N]`` with ``|S| < N - 1`` (for reports)."""
    return sum(comb(N, k) for k in range(N - 1))
