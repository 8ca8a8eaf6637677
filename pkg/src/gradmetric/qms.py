"""Finite-dimensional quantum Markov semigroups and the BKM gradient structure.

Superoperators act on column-stacked matrices: ``vec(A) = A.reshape(-1, order="F")``.
``superop_dagger`` is the Schrodinger-picture generator acting on densities;
``superop`` is its adjoint for ``<A, B> = Tr[A^* B]``, i.e. the conjugate
transpose of the matrix.

The tangent space of traceless Hermitian matrices is parametrised by an
orthonormal generalised Gell-Mann basis ``E_1..E_{d^2-1}``; restricted
superoperators become real matrices in that basis.
"""
import json
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from .critical import build_metric_series, verify_order
from .errors import (InvalidHamiltonian, NotErgodic, NotTangent, SingularState,
                     SpecParseError, StepTooLarge)
from .jets import Domain, FieldPair, Jet, _load, _parse_number
from .multiindex import homogeneous, multi_indices, multinomial, orbit_ids
from .tensor_core import orbit_average

HERMITIAN_TOL = 1e-12
ERGODIC_RATIO = 1e-8
POSITIVITY_EPS = 1e-10
LOGMEAN_SERIES_CUTOFF = 1e-8


def vec(a):
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, d):
    return np.asarray(v).reshape(d, d, order="F")


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_function(a, f):
    w, v = np.linalg.eigh(a)
    return (v * f(w)) @ dagger(v)


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got {rho.shape}")
        if np.max(np.abs(rho - dagger(rho))) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > HERMITIAN_TOL:
            raise ValueError(f"trace {np.trace(rho).real:.3e} differs from 1")
        if np.min(np.linalg.eigvalsh(rho)) < -HERMITIAN_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def d(self):
        return self.rho.shape[0]

    def min_eigenvalue(self):
        return float(np.min(np.linalg.eigvalsh(self.rho)))

    def is_strictly_positive(self, eps=POSITIVITY_EPS):
        return self.min_eigenvalue() >= eps


def _matrix(x):
    return x.rho if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def require_positive(rho, eps=POSITIVITY_EPS, what="state"):
    m = _matrix(rho)
    lam = np.linalg.eigvalsh(m)
    if lam[0] < eps:
        raise SingularState(f"{what} has eigenvalue {lam[0]:.3e} below {eps:.1e}")
    return m


def random_unitary(d, rng):
    return unitary_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1), complex)


def sample_density(d, rng, floor=1e-3):
    """Dirichlet eigenvalues floored at ``floor``, conjugated by a Haar unitary."""
    p = floor + (1.0 - d * floor) * rng.dirichlet(np.ones(d))
    u = random_unitary(d, rng)
    rho = (u * p) @ dagger(u)
    return 0.5 * (rho + dagger(rho))


# --------------------------------------------------------------------------
# generators


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    d: int
    H: np.ndarray
    jumps: tuple
    superop_dagger: np.ndarray
    superop: np.ndarray

    def apply_dagger(self, rho):
        return unvec(self.superop_dagger @ vec(rho), self.d)

    def apply(self, a):
        return unvec(self.superop @ vec(a), self.d)

    def to_dict(self):
        def cm(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in m]
        return {"d": self.d, "H": cm(self.H), "jumps": [cm(j) for j in self.jumps]}


def gksl_dagger(H, jumps, rho):
    """``-i[H, rho] + sum_k (L rho L^* - 1/2 {L^* L, rho})``."""
    out = -1j * (H @ rho - rho @ H)
    for L in jumps:
        LdL = dagger(L) @ L
        out = out + L @ rho @ dagger(L) - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def lindblad_superoperator(H, jumps, herm_tol=HERMITIAN_TOL):
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    if H.shape != (d, d):
        raise InvalidHamiltonian(f"Hamiltonian must be square, got {H.shape}")
    if np.max(np.abs(H - dagger(H)), initial=0.0) > herm_tol * max(1.0, np.max(np.abs(H))):
        raise InvalidHamiltonian("Hamiltonian is not Hermitian")
    jumps = tuple(np.asarray(L, dtype=complex) for L in jumps)
    for L in jumps:
        if L.shape != (d, d):
            raise ValueError(f"jump operator has shape {L.shape}, expected {(d, d)}")
    S = np.zeros((d * d, d * d), dtype=complex)
    for col in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[col] = 1.0
        S[:, col] = vec(gksl_dagger(H, jumps, unvec(e, d)))
    return LindbladGenerator(d, H, jumps, S, dagger(S))


def stationary_state(gen, eps=POSITIVITY_EPS, ratio=ERGODIC_RATIO):
    """Unique density in the kernel of ``superop_dagger``."""
    _, s, vh = np.linalg.svd(gen.superop_dagger)
    if s.size < 2 or not s[-2] > 0 or s[-1] / s[-2] >= ratio:
        raise NotErgodic(f"kernel is not one-dimensional: smallest singular values "
                         f"{s[-1]:.3e}, {s[-2] if s.size > 1 else 0.0:.3e}")
    rho = unvec(np.conj(vh[-1]), gen.d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + dagger(rho))
    rho = rho / np.trace(rho).real
    lam = np.linalg.eigvalsh(rho)
    if lam[0] < eps:
        raise SingularState(f"stationary state has eigenvalue {lam[0]:.3e}")
    return DensityMatrix(rho)


# --------------------------------------------------------------------------
# BKM operators


def logarithmic_mean(a, b):
    """``(a - b)/(log a - log b)`` with a series near ``a == b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    la, lb = np.log(a), np.log(b)
    u = la - lb
    near = np.abs(u) < LOGMEAN_SERIES_CUTOFF
    safe = np.where(near, 1.0, u)
    direct = (a - b) / safe
    # L(a, b) = sqrt(ab) * sinh(u/2)/(u/2) = sqrt(ab) (1 + u^2/24 + u^4/1920)
    g = np.sqrt(a * b)
    series = g * (1.0 + u * u / 24.0 + u**4 / 1920.0)
    return np.where(near, series, direct)


@dataclass(frozen=True, eq=False)
class BKMForm:
    sigma: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    W: np.ndarray

    @classmethod
    def of(cls, sigma, eps=POSITIVITY_EPS):
        s = require_positive(sigma, eps, "sigma")
        lam, v = np.linalg.eigh(s)
        W = logarithmic_mean(lam[:, None], lam[None, :])
        np.fill_diagonal(W, lam)
        return cls(s, lam, v, W)

    @property
    def d(self):
        return self.eigenvalues.size

    def to_eigenbasis(self, b):
        return dagger(self.eigenvectors) @ b @ self.eigenvectors

    def from_eigenbasis(self, b):
        return self.eigenvectors @ b @ dagger(self.eigenvectors)

    def superop(self, inverse=False):
        m = np.zeros((self.d**2, self.d**2), dtype=complex)
        f = bkm_inv_apply if inverse else bkm_apply
        for col in range(self.d**2):
            e = np.zeros(self.d**2, dtype=complex)
            e[col] = 1.0
            m[:, col] = vec(f(self, unvec(e, self.d)))
        return m


def _form(sigma):
    return sigma if isinstance(sigma, BKMForm) else BKMForm.of(sigma)


def bkm_apply(form, b):
    """``int_0^1 sigma^(1-s) B sigma^s ds`` via the logarithmic-mean weights."""
    form = _form(form)
    return form.from_eigenbasis(form.W * form.to_eigenbasis(np.asarray(b, dtype=complex)))


def bkm_inv_apply(form, b):
    form = _form(form)
    return form.from_eigenbasis(form.to_eigenbasis(np.asarray(b, dtype=complex)) / form.W)


def _opnorm(m):
    return float(np.linalg.norm(m, 2))


def check_bkm_detailed_balance(gen, sigma, tol=1e-9):
    """``||M L - L^dagger M||`` against ``tol * ||L||`` (spectral norms)."""
    M = BKMForm.of(sigma).superop()
    defect = _opnorm(M @ gen.superop - gen.superop_dagger @ M)
    return bool(defect <= tol * max(_opnorm(gen.superop), np.finfo(float).tiny)), defect


def check_bkm_detailed_balance_inverse(gen, sigma, tol=1e-9):
    """Same criterion written with the inverse: ``M^-1 L^dagger - L M^-1``."""
    form = BKMForm.of(sigma)
    Mi = form.superop(inverse=True)
    defect = _opnorm(Mi @ gen.superop_dagger - gen.superop @ Mi)
    ref = _opnorm(gen.superop) * _opnorm(Mi)
    return bool(defect <= tol * max(ref, np.finfo(float).tiny)), defect


# --------------------------------------------------------------------------
# entropy functionals


def _log(m):
    return hermitian_function(m, np.log)


def relative_entropy(rho, sigma, eps=POSITIVITY_EPS):
    r = require_positive(rho, eps, "rho")
    s = require_positive(sigma, eps, "sigma")
    return float(np.real(np.trace(r @ (_log(r) - _log(s)))))


def entropy_production(rho, sigma, gen, eps=POSITIVITY_EPS):
    """``-Tr[(log rho - log sigma) L^dagger rho]``."""
    r = require_positive(rho, eps, "rho")
    s = require_positive(sigma, eps, "sigma")
    return float(-np.real(np.trace((_log(r) - _log(s)) @ gen.apply_dagger(r))))


def evolve(gen, rho, t):
    """``exp(t L^dagger) rho``."""
    out = unvec(expm(t * gen.superop_dagger) @ vec(_matrix(rho)), gen.d)
    return 0.5 * (out + dagger(out))


def check_tangent(a, tol=1e-10):
    a = np.asarray(a, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - dagger(a))) > tol * scale or abs(np.trace(a)) > tol * scale:
        raise NotTangent("matrix is not Hermitian and traceless")
    return a


def hessian_form(sigma, a, b):
    """``<A, M_sigma^-1 B>`` for tangent ``A, B``."""
    a = check_tangent(a)
    b = check_tangent(b)
    return float(np.real(np.trace(dagger(a) @ bkm_inv_apply(_form(sigma), b))))


def entropy_production_hessian_check(sigma, gen, a, eps=None):
    """Second derivative of ``I_sigma(sigma + e A)`` at 0 against its closed form.

    The closed form is ``-2 <A, M^-1 L^dagger A>``, i.e. ``2 h(A, Lambda A)``
    with ``Lambda = -L^dagger``.  The left side is a Richardson-refined second
    central difference.
    """
    a = check_tangent(a)
    s = require_positive(sigma, what="sigma")
    form = _form(s)
    rhs = -2.0 * float(np.real(np.trace(dagger(a) @ bkm_inv_apply(form, gen.apply_dagger(a)))))
    norm = float(np.linalg.norm(a, 2))
    if norm == 0.0:
        return 0.0, rhs, abs(rhs)
    lam_min = float(form.eigenvalues[0])
    if eps is None:
        eps = 1e-2 * lam_min / norm
    if 2 * eps * norm >= lam_min:
        raise StepTooLarge(f"step {eps:.3e} leaves the positive cone")

    def I(e):
        return entropy_production(s + e * a, s, gen, eps=0.0)

    def d2(h):
        return (I(h) - 2.0 * I(0.0) + I(-h)) / (h * h)

    lhs = (4.0 * d2(eps) - d2(2 * eps)) / 3.0
    return lhs, rhs, abs(lhs - rhs)


# --------------------------------------------------------------------------
# tangent coordinates


@lru_cache(maxsize=None)
def _gell_mann(d):
    basis = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / np.sqrt(2)
            m[k, j] = 1j / np.sqrt(2)
            basis.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        basis.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    out = np.array(basis).reshape(len(basis), d, d)
    out.setflags(write=False)
    return out


def gell_mann_basis(d):
    """Orthonormal (``Tr[E_i E_j] = delta_ij``) basis of traceless Hermitian matrices."""
    return _gell_mann(d)


def tangent_matrices(gen, sigma):
    """``(Hmat, Lmat)`` with ``Hmat[i, j] = <E_i, M^-1 E_j>``, ``Lmat[i, j] = <E_i, L^dagger E_j>``."""
    E = gell_mann_basis(gen.d)
    form = _form(sigma)
    k = len(E)
    Hmat = np.empty((k, k))
    Lmat = np.empty((k, k))
    ME = [bkm_inv_apply(form, e) for e in E]
    LE = [gen.apply_dagger(e) for e in E]
    for i in range(k):
        for j in range(k):
            Hmat[i, j] = np.real(np.trace(E[i] @ ME[j]))
            Lmat[i, j] = np.real(np.trace(E[i] @ LE[j]))
    return 0.5 * (Hmat + Hmat.T), Lmat


def lambda_in_h_orthonormal(Hmat, Lmat):
    """Matrix of ``Lambda = -L^dagger`` in an ``h``-orthonormal basis."""
    C = np.linalg.cholesky(Hmat)
    Lam = -Lmat
    return C.T @ Lam @ np.linalg.inv(C.T)


# --------------------------------------------------------------------------
# gradient-structure report


@dataclass(frozen=True)
class GradientStructureReport:
    bkm_defect: float
    bkm_detailed_balance: bool
    cond_i_min: float
    cond_i_violations: tuple
    cond_ii: float
    cond_iii_asymmetry: float
    cond_iii_min_eigenvalue: float
    verdict: bool
    consistent: bool
    tolerances: dict = field(default_factory=dict)
    small_eigenvalues: tuple = ()

    def to_dict(self):
        return {"bkm_defect": self.bkm_defect,
                "bkm_detailed_balance": self.bkm_detailed_balance,
                "cond_i": {"min_entropy_production": self.cond_i_min,
                           "violations": [list(v) for v in self.cond_i_violations]},
                "cond_ii": self.cond_ii,
                "cond_iii": {"asymmetry": self.cond_iii_asymmetry,
                             "min_eigenvalue": self.cond_iii_min_eigenvalue,
                             "eigenvalues_below_threshold": list(self.small_eigenvalues)},
                "verdict": self.verdict,
                "verdict_matches_detailed_balance": self.consistent,
                "tolerances": self.tolerances}


def check_gradient_structure(gen, samples=200, seed=0, tol_bkm=1e-9, tol_stationary=1e-10,
                             tol_sym=1e-8, tol_eig=1e-10, floor=1e-3):
    """Conditions (i)-(iii) for the entropy gradient structure plus the BKM test."""
    sigma = stationary_state(gen).rho
    db, bkm_defect = check_bkm_detailed_balance(gen, sigma, tol_bkm)
    cond_ii = float(np.linalg.norm(gen.apply_dagger(sigma)))
    rng = np.random.default_rng(seed)
    values, violations = [], []
    for k in range(samples):
        rho = sample_density(gen.d, rng, floor)
        if np.allclose(rho, sigma, atol=1e-12):
            continue
        val = entropy_production(rho, sigma, gen)
        values.append(val)
        if not val > 0:
            violations.append((k, val))
    Hmat, Lmat = tangent_matrices(gen, sigma)
    Lt = lambda_in_h_orthonormal(Hmat, Lmat)
    asym = float(np.max(np.abs(Lt - Lt.T)))
    eig = np.linalg.eigvalsh(0.5 * (Lt + Lt.T))
    scale = max(1.0, float(np.max(np.abs(Lt))))
    ok_iii = asym <= tol_sym * scale and eig[0] > tol_eig
    verdict = bool(cond_ii <= tol_stationary and not violations and ok_iii)
    return GradientStructureReport(
        bkm_defect=bkm_defect, bkm_detailed_balance=db,
        cond_i_min=float(min(values)) if values else float("nan"),
        cond_i_violations=tuple(violations), cond_ii=cond_ii,
        cond_iii_asymmetry=asym, cond_iii_min_eigenvalue=float(eig[0]),
        verdict=verdict, consistent=verdict == db,
        tolerances={"bkm": tol_bkm, "stationary": tol_stationary, "symmetry": tol_sym,
                    "eigenvalue": tol_eig, "sample_floor": floor, "samples": samples},
        small_eigenvalues=tuple(float(v) for v in eig if v <= tol_eig))


# --------------------------------------------------------------------------
# the metric pipeline on the state space


@lru_cache(maxsize=None)
def _log_divided_difference(points, dps=30):
    """Divided difference of ``log`` at ``points`` (sorted tuple, repeats allowed).

    For ``k >= 1``: ``(-1)^(k+1) int_0^inf prod_i (t + points_i)^-1 dt``.
    """
    k = len(points) - 1
    if k == 0:
        return float(np.log(points[0]))
    with mpmath.workdps(dps):
        pts = [mpmath.mpf(p) for p in points]
        val = mpmath.quad(lambda t: mpmath.fprod(1 / (t + p) for p in pts), [0, 1, mpmath.inf])
        return float((-1) ** (k + 1) * val)


def log_divided_differences(lam, k):
    """Dense array ``D[i0..ik]`` of divided differences of ``log``."""
    d = len(lam)
    out = np.empty((d,) * (k + 1))
    for idx in np.ndindex(*out.shape):
        key = tuple(sorted(float(lam[i]) for i in idx))
        out[idx] = _log_divided_difference(key)
    return out


def entropy_gradient_jets(sigma, order):
    """Jets of ``Y_b(x) = Tr[(log rho(x) - log sigma) E_b]`` with ``rho(x) = sigma + x.E``.

    The degree-k part comes from the k-th divided differences of ``log`` in
    the eigenbasis of ``sigma``.
    """
    form = _form(sigma)
    d = form.d
    E = gell_mann_basis(d)
    Et = np.array([form.to_eigenbasis(e) for e in E])
    n = len(E)
    coeffs = np.zeros((n, len(multi_indices(n, order))))
    pos = 1
    for k in range(1, order + 1):
        D = log_divided_differences(form.eigenvalues, k)
        S = np.real(np.einsum(_chain_spec(k), D, *([Et] * (k + 1)), optimize=True))
        S = np.moveaxis(S, -1, 0)                           # (b, c1..ck)
        S = orbit_average(S, k)
        mons = homogeneous(n, k)
        _, reps = orbit_ids(n, k)
        flat = S.reshape(n, n**k)[:, reps]
        weights = np.array([multinomial(m) for m in mons], dtype=float)
        coeffs[:, pos:pos + len(mons)] = flat * weights
        pos += len(mons)
    base = np.zeros(n)
    return tuple(Jet(n, order, base, coeffs[b]) for b in range(n))


def _chain_spec(k):
    """einsum for ``D[i0..ik] E[c1,i0,i1] .. E[ck,i(k-1),ik] E[b,ik,i0] -> (c1..ck, b)``."""
    i = "abcdefghij"[:k + 1]
    c = "klmnopqrst"[:k]
    ops = [f"{c[s]}{i[s]}{i[s + 1]}" for s in range(k)] + [f"z{i[k]}{i[0]}"]
    return f"{i}," + ",".join(ops) + f"->{c}z"


@dataclass(frozen=True, eq=False)
class SimplexMetricResult:
    fields: FieldPair
    series: object
    defect: float
    Hmat: np.ndarray
    Lmat: np.ndarray

    def to_dict(self):
        return {"dim": self.fields.dim, "order": self.series.order,
                "verify_order_defect": self.defect,
                "g_bar": self.series.g_bar.tolist(),
                "h_matrix": self.Hmat.tolist()}


def simplex_fields(gen, order, sigma=None):
    """Field pair on tangent coordinates ``x`` with ``rho(x) = sigma + sum_c x_c E_c``.

    ``X^a = -(L^dagger rho(x))_a`` and ``Y_b = d_b H_sigma(rho(x))``, so that
    ``X.Y`` is the entropy production (positive off the stationary state).
    """
    sigma = stationary_state(gen).rho if sigma is None else _matrix(sigma)
    form = _form(sigma)
    _, Lmat = tangent_matrices(gen, sigma)
    n = Lmat.shape[0]
    M = len(multi_indices(n, order))
    X = []
    for a in range(n):
        c = np.zeros(M)
        c[1:n + 1] = -Lmat[a]
        X.append(Jet(n, order, np.zeros(n), c))
    Y = entropy_gradient_jets(form, order)
    radius = 0.5 * float(form.eigenvalues[0])
    return FieldPair(n, tuple(X), Y, Domain.ball(np.zeros(n), radius))


def build_simplex_metric(gen, order):
    """Metric series of the entropy gradient structure around the stationary state.

    Raises :class:`ConditionThreeViolated` when the generator is not BKM
    symmetric.
    """
    sigma = stationary_state(gen).rho
    fp = simplex_fields(gen, order + 1, sigma)
    ms = build_metric_series(fp, order, fit=order >= 3)
    Hmat, Lmat = tangent_matrices(gen, sigma)
    return SimplexMetricResult(fp, ms, verify_order(ms, fp), Hmat, Lmat)


# --------------------------------------------------------------------------
# generator families


def detailed_balance_generator(sigma_eigs, rng, unitary=None, rate_scale=1.0, dephasing=1):
    """Jump pairs ``V|i><j|V^*`` with ``k_ij s_j = k_ji s_i`` plus dephasing by
    Hermitian operators commuting with ``sigma``."""
    s = np.asarray(sigma_eigs, dtype=float)
    s = s / s.sum()
    d = s.size
    V = random_unitary(d, rng) if unitary is None else np.asarray(unitary, dtype=complex)
    jumps = []
    for i in range(d):
        for j in range(i + 1, d):
            base = rate_scale * rng.uniform(0.5, 1.5)
            k_ij = base * s[i]
            k_ji = base * s[j]
            jumps.append(np.sqrt(k_ij) * np.outer(V[:, i], np.conj(V[:, j])))
            jumps.append(np.sqrt(k_ji) * np.outer(V[:, j], np.conj(V[:, i])))
    for _ in range(dephasing):
        diag = rng.normal(size=d) * np.sqrt(rate_scale) * 0.5
        jumps.append((V * diag) @ dagger(V))
    return lindblad_superoperator(np.zeros((d, d)), jumps), (V * s) @ dagger(V)


def with_commuting_hamiltonian(gen, sigma, rng, strength=1.0):
    """Add ``H = V diag(h) V^*`` (non-scalar, commuting with ``sigma``)."""
    lam, V = np.linalg.eigh(_matrix(sigma))
    d = lam.size
    h = strength * np.linspace(-1.0, 1.0, d) * rng.uniform(0.5, 1.5)
    H = (V * h) @ dagger(V)
    H = 0.5 * (H + dagger(H))
    return lindblad_superoperator(H, gen.jumps)


def random_sigma_eigs(d, rng, floor=0.05):
    return floor + (1.0 - d * floor) * rng.dirichlet(np.ones(d))


def depolarising_generator(sigma0, gamma=1.0):
    """``L^dagger rho = gamma (sigma0 Tr rho - rho)``."""
    lam, V = np.linalg.eigh(_matrix(sigma0))
    d = lam.size
    jumps = [np.sqrt(gamma * lam[i]) * np.outer(V[:, i], np.conj(V[:, j]))
             for i in range(d) for j in range(d)]
    return lindblad_superoperator(np.zeros((d, d)), jumps)


def birth_death_generator(a, b, hamiltonian=None):
    """Qubit jumps ``sqrt(a)|0><1|`` and ``sqrt(b)|1><0|`` (stationary ``diag(a, b)/(a+b)``)."""
    L1 = np.sqrt(a) * np.array([[0, 1], [0, 0]], dtype=complex)
    L2 = np.sqrt(b) * np.array([[0, 0], [1, 0]], dtype=complex)
    H = np.zeros((2, 2)) if hamiltonian is None else hamiltonian
    return lindblad_superoperator(H, [L1, L2])


# --------------------------------------------------------------------------
# generator-spec documents


def _parse_complex(value, what):
    if isinstance(value, dict):
        return complex(_parse_number(value.get("re", 0), f"{what}.re"),
                       _parse_number(value.get("im", 0), f"{what}.im"))
    if isinstance(value, list):
        if len(value) != 2:
            raise SpecParseError(f"{what}: complex entries are [re, im]")
        return complex(_parse_number(value[0], f"{what}.re"),
                       _parse_number(value[1], f"{what}.im"))
    return complex(_parse_number(value, what), 0.0)


def _parse_matrix(raw, d, what):
    if not isinstance(raw, list) or len(raw) != d or not all(
            isinstance(r, list) and len(r) == d for r in raw):
        raise SpecParseError(f"{what} must be a {d}x{d} matrix")
    return np.array([[_parse_complex(v, f"{what}[{i}][{j}]") for j, v in enumerate(row)]
                     for i, row in enumerate(raw)])


def parse_generator_spec(document):
    """``{d, H, jumps}``; entries are numbers, exact strings, ``[re, im]`` or ``{re, im}``."""
    doc = _load(document)
    if not isinstance(doc, dict) or "d" not in doc:
        raise SpecParseError("generator spec must be an object with key 'd'")
    d = doc["d"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise SpecParseError(f"d must be a positive integer, got {d!r}")
    H = _parse_matrix(doc["H"], d, "H") if "H" in doc else np.zeros((d, d))
    jumps = doc.get("jumps", [])
    if not isinstance(jumps, list):
        raise SpecParseError("jumps must be a list of matrices")
    return lindblad_superoperator(H, [_parse_matrix(j, d, f"jumps[{k}]")
                                      for k, j in enumerate(jumps)])


def generator_spec_dict(gen):
    return gen.to_dict()


def dumps_generator(gen):
    return json.dumps(generator_spec_dict(gen), sort_keys=True)
