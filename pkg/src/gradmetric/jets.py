"""Truncated multivariate Taylor expansions (jets) of field components.

A :class:`Jet` holds the coefficients of ``(x - base)**m`` for all exponent
tuples ``m`` of total degree at most ``order`` (so a coefficient is the
partial derivative at the base point divided by ``m!``).  Coefficients are a
flat array in the canonical graded-lexicographic order of
:func:`gradmetric.multiindex.multi_indices`; every summation walks that order,
which keeps evaluation bit-reproducible.

Fields are polynomials in practice: a field-spec document lists finitely many
monomials and everything not listed is zero.
"""
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .errors import (BaseMismatch, OrderExceeded, SpecDimensionError,
                     SpecParseError)
from .multiindex import (homogeneous, index_table, mfactorial, multi_indices,
                         orbit_ids)

DEFAULT_CRITICAL_TOL = 1e-10
DEFAULT_SEEDS_PER_AXIS = 9


@dataclass(frozen=True, eq=False)
class Jet:
    dim: int
    order: int
    base_point: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        base = np.array(self.base_point, dtype=float).reshape(-1)
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if base.shape != (self.dim,):
            raise ValueError(f"base point has shape {base.shape}, expected ({self.dim},)")
        expected = len(multi_indices(self.dim, self.order))
        if coeffs.shape != (expected,):
            raise ValueError(f"{coeffs.size} coefficients, expected {expected}")
        base.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "base_point", base)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zero(cls, dim, order, base_point=None):
        base = np.zeros(dim) if base_point is None else base_point
        return cls(dim, order, base, np.zeros(len(multi_indices(dim, order))))

    @classmethod
    def from_dict(cls, dim, order, base_point, terms):
        """Build from ``{exponent tuple: coefficient}``; missing terms are zero."""
        table = index_table(dim, order)
        coeffs = np.zeros(len(table))
        for m, c in terms.items():
            m = tuple(int(k) for k in m)
            if len(m) != dim:
                raise SpecDimensionError(f"monomial {m} has length {len(m)}, dim is {dim}")
            if m not in table:
                raise OrderExceeded(f"monomial {m} exceeds order {order}")
            coeffs[table[m]] = c
        return cls(dim, order, base_point, coeffs)

    @property
    def monomials(self):
        return multi_indices(self.dim, self.order)

    def coeff(self, m):
        idx = index_table(self.dim, self.order).get(tuple(m))
        if idx is None:
            if sum(m) > self.order:
                raise OrderExceeded(f"|m| = {sum(m)} exceeds order {self.order}")
            raise KeyError(m)
        return float(self.coeffs[idx])

    def as_dict(self, nonzero=True):
        return {m: float(c) for m, c in zip(self.monomials, self.coeffs)
                if c != 0.0 or not nonzero}

    def degree_block(self, degree):
        """Coefficients of total degree ``degree`` (canonical order)."""
        start = len(multi_indices(self.dim, degree - 1)) if degree else 0
        stop = len(multi_indices(self.dim, degree))
        return self.coeffs[start:stop]

    def padded(self, order):
        """Same polynomial with truncation order raised to ``order`` (zero fill)."""
        if order < self.order:
            raise ValueError("use truncated() to lower the order")
        coeffs = np.zeros(len(multi_indices(self.dim, order)))
        coeffs[:self.coeffs.size] = self.coeffs
        return Jet(self.dim, order, self.base_point, coeffs)

    def truncated(self, order):
        order = min(order, self.order)
        return Jet(self.dim, order, self.base_point,
                   self.coeffs[:len(multi_indices(self.dim, order))])

    def __add__(self, other):
        _check_compatible(self, other)
        k = min(self.order, other.order)
        a, b = self.truncated(k), other.truncated(k)
        return Jet(self.dim, k, self.base_point, a.coeffs + b.coeffs)

    def __sub__(self, other):
        return self + (other * -1.0)

    def __mul__(self, scalar):
        return Jet(self.dim, self.order, self.base_point, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __call__(self, x):
        return eval_jet(self, x)


def _check_compatible(a, b):
    if a.dim != b.dim:
        raise BaseMismatch(f"dimension mismatch {a.dim} vs {b.dim}")
    if not np.array_equal(a.base_point, b.base_point):
        raise BaseMismatch(f"base points differ: {a.base_point} vs {b.base_point}")


def monomial_values(dx, order):
    """Values of all monomials ``dx**m`` (canonical order) at the points ``dx``.

    Powers are built by repeated multiplication and a monomial is the product
    of its axis powers taken in axis order, so the result does not depend on
    the platform ``pow``.
    """
    dx = np.asarray(dx, dtype=float)
    n = dx.shape[-1]
    lead = dx.shape[:-1]
    powers = []
    for i in range(n):
        col = [np.ones(lead)]
        for _ in range(order):
            col.append(col[-1] * dx[..., i])
        powers.append(col)
    out = []
    for m in multi_indices(n, order):
        mono = np.ones(lead)
        for i, k in enumerate(m):
            if k:
                mono = mono * powers[i][k]
        out.append(mono)
    return out


def eval_jet(j, x):
    """Evaluate the truncated Taylor sum at ``x`` (shape ``(n,)`` or ``(..., n)``)."""
    x = np.asarray(x, dtype=float)
    dx = x - j.base_point
    lead = dx.shape[:-1]
    acc = np.zeros(lead)
    for c, mono in zip(j.coeffs, monomial_values(dx, j.order)):
        if c != 0.0:
            acc = acc + c * mono
    return acc if lead else float(acc)


def eval_jets(jets, x):
    """Evaluate several jets sharing dim, order and base point; shape ``(..., k)``.

    Same canonical summation order as :func:`eval_jet`, with the monomial
    values computed once.
    """
    x = np.asarray(x, dtype=float)
    first = jets[0]
    dx = x - first.base_point
    coeffs = np.stack([j.coeffs for j in jets], axis=-1)
    acc = np.zeros(dx.shape[:-1] + (len(jets),))
    for c, mono in zip(coeffs, monomial_values(dx, first.order)):
        if np.any(c != 0.0):
            acc = acc + np.where(c != 0.0, c * mono[..., None], 0.0)
    return acc


def derivative_at_base(j, m):
    """Partial derivative ``d^m j`` at the base point, i.e. ``m! * coeff[m]``."""
    m = tuple(int(k) for k in m)
    if len(m) != j.dim:
        raise ValueError(f"multi-index {m} has wrong length for dim {j.dim}")
    if sum(m) > j.order:
        raise OrderExceeded(f"|m| = {sum(m)} exceeds jet order {j.order}")
    return mfactorial(m) * j.coeff(m)


def derivative_tensor(j, N):
    """Dense symmetric array ``D[c1..cN] = d_{c1}...d_{cN} j`` at the base point."""
    if N > j.order:
        raise OrderExceeded(f"derivative order {N} exceeds jet order {j.order}")
    n = j.dim
    block = j.degree_block(N)
    scale = np.array([mfactorial(m) for m in homogeneous(n, N)], dtype=float)
    ids, _ = orbit_ids(n, N)
    return (block * scale)[ids].reshape((n,) * N)


def jets_from_tensors(n, tensors, base_point):
    """Inverse of :func:`derivative_tensor` for a list of symmetric arrays
    ``tensors[N]`` (leading axes may index components).

    Returns an array of coefficients with the component axes first.
    """
    order = len(tensors) - 1
    lead = np.asarray(tensors[0]).shape
    blocks = []
    for N, t in enumerate(tensors):
        t = np.asarray(t, dtype=float)
        _, reps = orbit_ids(n, N)
        flat = t.reshape(lead + (n**N,))
        scale = np.array([mfactorial(m) for m in homogeneous(n, N)], dtype=float)
        blocks.append(flat[..., reps] / scale)
    return np.concatenate(blocks, axis=-1), order


@lru_cache(maxsize=None)
def _product_table(n, order):
    mons = multi_indices(n, order)
    table = index_table(n, order)
    ia, ib, ic = [], [], []
    for i, m in enumerate(mons):
        for k, q in enumerate(mons):
            if sum(m) + sum(q) > order:
                continue
            ia.append(i)
            ib.append(k)
            ic.append(table[tuple(a + b for a, b in zip(m, q))])
    return np.array(ia), np.array(ib), np.array(ic)


def jet_multiply(a, b):
    """Cauchy product of two jets, truncated at ``min(a.order, b.order)``."""
    _check_compatible(a, b)
    k = min(a.order, b.order)
    ia, ib, ic = _product_table(a.dim, k)
    ca = a.coeffs[:len(multi_indices(a.dim, k))]
    cb = b.coeffs[:len(multi_indices(b.dim, k))]
    out = np.bincount(ic, weights=ca[ia] * cb[ib], minlength=ca.size)
    return Jet(a.dim, k, a.base_point, out)


def jet_partial(j, axis):
    """Jet of the partial derivative along ``axis`` (order drops by one)."""
    if j.order == 0:
        return Jet.zero(j.dim, 0, j.base_point)
    table = index_table(j.dim, j.order - 1)
    coeffs = np.zeros(len(table))
    for c, m in zip(j.coeffs, j.monomials):
        if m[axis] == 0 or c == 0.0:
            continue
        q = list(m)
        q[axis] -= 1
        coeffs[table[tuple(q)]] += c * m[axis]
    return Jet(j.dim, j.order - 1, j.base_point, coeffs)


def recenter(j, point):
    """Re-expand the (polynomial) jet around ``point``.

    Exact for polynomials: the coefficient of ``(x - p)**q`` collects
    ``c_m * binom(m, q) * (p - base)**(m - q)`` over ``m >= q``.
    """
    point = np.asarray(point, dtype=float)
    shift = point - j.base_point
    table = index_table(j.dim, j.order)
    out = np.zeros(len(table))
    for c, m in zip(j.coeffs, j.monomials):
        if c == 0.0:
            continue
        for q in multi_indices(j.dim, sum(m)):
            if any(qi > mi for qi, mi in zip(q, m)):
                continue
            w = c
            for qi, mi, s in zip(q, m, shift):
                w *= comb(mi, qi) * s ** (mi - qi)
            out[table[q]] += w
    return Jet(j.dim, j.order, point, out)


# --------------------------------------------------------------------------
# domains and field pairs


@dataclass(frozen=True, eq=False)
class Domain:
    """Axis-aligned box (``lo``/``hi``) or Euclidean ball (``center``/``radius``)."""

    kind: str
    lo: np.ndarray = None
    hi: np.ndarray = None
    center: np.ndarray = None
    radius: float = None

    @classmethod
    def box(cls, lo, hi):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise SpecParseError(f"invalid box bounds {lo} .. {hi}")
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius):
        if radius <= 0:
            raise SpecParseError(f"ball radius must be positive, got {radius}")
        return cls("ball", center=np.asarray(center, dtype=float), radius=float(radius))

    @property
    def dim(self):
        return (self.lo if self.kind == "box" else self.center).size

    def bounds(self):
        if self.kind == "box":
            return self.lo, self.hi
        return self.center - self.radius, self.center + self.radius

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return np.all((x >= self.lo - slack) & (x <= self.hi + slack), axis=-1)
        return np.linalg.norm(x - self.center, axis=-1) <= self.radius + slack

    def grid(self, per_axis):
        """Uniform tensor grid over the bounding box, restricted to the domain."""
        lo, hi = self.bounds()
        axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
        return pts[self.contains(pts)]

    def inradius_from(self, x):
        """Distance from ``x`` to the domain boundary (0 outside)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return float(max(0.0, min(np.min(x - self.lo), np.min(self.hi - x))))
        return float(max(0.0, self.radius - np.linalg.norm(x - self.center)))

    def outradius_from(self, x):
        """Largest distance from ``x`` to a point of the domain."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            far = np.maximum(np.abs(x - self.lo), np.abs(self.hi - x))
            return float(np.linalg.norm(far))
        return float(np.linalg.norm(x - self.center) + self.radius)

    def to_dict(self):
        if self.kind == "box":
            return {"box": {"min": [repr(float(v)) for v in self.lo],
                            "max": [repr(float(v)) for v in self.hi]}}
        return {"ball": {"center": [repr(float(v)) for v in self.center],
                         "radius": repr(self.radius)}}


@dataclass(frozen=True, eq=False)
class FieldPair:
    """Components ``X^a`` of a vector field and ``Y_b`` of a co-vector field."""

    dim: int
    X: tuple
    Y: tuple
    domain: Domain = None

    def __post_init__(self):
        X, Y = tuple(self.X), tuple(self.Y)
        if len(X) != self.dim or len(Y) != self.dim:
            raise SpecDimensionError(f"need {self.dim} components of X and Y, "
                                     f"got {len(X)} and {len(Y)}")
        first = X[0]
        for j in X + Y:
            if j.dim != self.dim or j.order != first.order:
                raise SpecDimensionError("component jets disagree in dim or order")
            if not np.array_equal(j.base_point, first.base_point):
                raise SpecDimensionError("component jets disagree in base point")
        if self.domain is not None and self.domain.dim != self.dim:
            raise SpecDimensionError(f"domain dim {self.domain.dim} != {self.dim}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def order(self):
        return self.X[0].order

    @property
    def base_point(self):
        return self.X[0].base_point

    def eval_X(self, x):
        return eval_jets(self.X, x)

    def eval_Y(self, x):
        return eval_jets(self.Y, x)

    def pairing(self, x):
        return np.sum(self.eval_X(x) * self.eval_Y(x), axis=-1)

    def jacobian_Y(self, x):
        """``J[..., b, c] = d_c Y_b`` at ``x``."""
        cols = [np.stack([eval_jet(jet_partial(j, c), x) for j in self.Y], axis=-1)
                for c in range(self.dim)]
        return np.stack(cols, axis=-1)

    def padded(self, order):
        return FieldPair(self.dim, tuple(j.padded(order) for j in self.X),
                         tuple(j.padded(order) for j in self.Y), self.domain)

    def recentered(self, point):
        return FieldPair(self.dim, tuple(recenter(j, point) for j in self.X),
                         tuple(recenter(j, point) for j in self.Y), self.domain)

    def permuted(self, perm):
        """Relabel coordinates: new coordinate ``i`` is old coordinate ``perm[i]``."""
        perm = list(perm)
        table = index_table(self.dim, self.order)

        def relabel(j):
            coeffs = np.zeros(j.coeffs.size)
            for k, m in enumerate(j.monomials):
                old = [0] * self.dim
                for new_axis, old_axis in enumerate(perm):
                    old[old_axis] = m[new_axis]
                coeffs[k] = j.coeffs[table[tuple(old)]]
            return Jet(self.dim, self.order, j.base_point[perm], coeffs)

        dom = self.domain
        if dom is not None:
            dom = (Domain.box(dom.lo[perm], dom.hi[perm]) if dom.kind == "box"
                   else Domain.ball(dom.center[perm], dom.radius))
        return FieldPair(self.dim, tuple(relabel(self.X[p]) for p in perm),
                         tuple(relabel(self.Y[p]) for p in perm), dom)


# --------------------------------------------------------------------------
# field-spec documents


def _parse_number(value, what):
    if isinstance(value, bool):
        raise SpecParseError(f"{what}: boolean is not a number")
    if isinstance(value, int):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecParseError(f"{what}: cannot parse {value!r}") from exc
    raise SpecParseError(f"{what}: expected a number or numeric string, got {value!r}")


def _parse_vector(values, what):
    if not isinstance(values, list):
        raise SpecParseError(f"{what}: expected a list")
    return np.array([_parse_number(v, f"{what}[{i}]") for i, v in enumerate(values)])


def _load(document):
    if isinstance(document, dict):
        # re-serialise so that float literals go through the exact decimal path
        document = json.dumps(document)
    try:
        # floats stay decimal strings until Fraction -> float (correctly rounded)
        return json.loads(document, parse_float=str)
    except (json.JSONDecodeError, TypeError) as exc:
        raise SpecParseError(f"malformed field spec: {exc}") from exc


def parse_domain(raw, dim):
    if not isinstance(raw, dict) or len(raw) != 1:
        raise SpecParseError("domain must be {'box': ...} or {'ball': ...}")
    if "box" in raw:
        lo = _parse_vector(raw["box"].get("min"), "domain.box.min")
        hi = _parse_vector(raw["box"].get("max"), "domain.box.max")
        if lo.size != dim or hi.size != dim:
            raise SpecDimensionError(f"domain box bounds must have length {dim}")
        return Domain.box(lo, hi)
    if "ball" in raw:
        center = _parse_vector(raw["ball"].get("center"), "domain.ball.center")
        if center.size != dim:
            raise SpecDimensionError(f"domain ball center must have length {dim}")
        return Domain.ball(center, _parse_number(raw["ball"].get("radius"),
                                                 "domain.ball.radius"))
    raise SpecParseError(f"unknown domain kind {sorted(raw)}")


def parse_field_spec(document):
    """Parse a field-spec document (JSON text or an already-loaded dict)."""
    doc = _load(document)
    if not isinstance(doc, dict):
        raise SpecParseError("field spec must be a JSON object")
    for key in ("dim", "order", "X", "Y"):
        if key not in doc:
            raise SpecParseError(f"missing key {key!r}")
    dim, order = doc["dim"], doc["order"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise SpecParseError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(order, int) or isinstance(order, bool) or order < 0:
        raise SpecParseError(f"order must be a non-negative integer, got {order!r}")
    base = (_parse_vector(doc["base_point"], "base_point") if "base_point" in doc
            else np.zeros(dim))
    if base.size != dim:
        raise SpecDimensionError(f"base_point has length {base.size}, dim is {dim}")
    domain = parse_domain(doc["domain"], dim) if "domain" in doc else None

    def components(name):
        records = doc[name]
        if not isinstance(records, list):
            raise SpecParseError(f"{name} must be a list of records")
        terms = [dict() for _ in range(dim)]
        for k, rec in enumerate(records):
            if not isinstance(rec, dict) or not {"component", "monomial",
                                                 "coefficient"} <= set(rec):
                raise SpecParseError(f"{name}[{k}] must have component, monomial, coefficient")
            comp = rec["component"]
            if not isinstance(comp, int) or isinstance(comp, bool):
                raise SpecParseError(f"{name}[{k}].component must be an integer")
            if not 0 <= comp < dim:
                raise SpecDimensionError(f"{name}[{k}].component {comp} out of range")
            mono = rec["monomial"]
            if not isinstance(mono, list) or not all(
                    isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in mono):
                raise SpecParseError(f"{name}[{k}].monomial must be non-negative integers")
            if len(mono) != dim:
                raise SpecDimensionError(f"{name}[{k}].monomial has length {len(mono)}")
            if sum(mono) > order:
                raise SpecDimensionError(f"{name}[{k}].monomial degree exceeds order {order}")
            key = tuple(mono)
            if key in terms[comp]:
                raise SpecParseError(f"{name}: duplicate term {key} in component {comp}")
            terms[comp][key] = _parse_number(rec["coefficient"], f"{name}[{k}].coefficient")
        return tuple(Jet.from_dict(dim, order, base, t) for t in terms)

    return FieldPair(dim, components("X"), components("Y"), domain)


def field_spec_dict(fp):
    """Document form of a field pair; coefficients as round-trip exact strings."""

    def records(jets):
        out = []
        for comp, j in enumerate(jets):
            for m, c in zip(j.monomials, j.coeffs):
                if c != 0.0:
                    out.append({"component": comp, "monomial": list(m),
                                "coefficient": repr(float(c))})
        return out

    doc = {"dim": fp.dim, "order": fp.order,
           "base_point": [repr(float(v)) for v in fp.base_point],
           "X": records(fp.X), "Y": records(fp.Y)}
    if fp.domain is not None:
        doc["domain"] = fp.domain.to_dict()
    return doc


def serialize_field_spec(fp):
    return json.dumps(field_spec_dict(fp), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# critical points


@dataclass(frozen=True)
class CriticalPoint:
    point: tuple
    residual: float
    degenerate: bool = False

    def __iter__(self):
        return iter(self.point)


def locate_critical_points(fp, tol=DEFAULT_CRITICAL_TOL, seeds_per_axis=DEFAULT_SEEDS_PER_AXIS,
                           max_iter=100, cond_bound=1e12):
    """Zeros of ``Y`` inside ``fp.domain`` by grid-seeded Newton iteration.

    Returns :class:`CriticalPoint` records sorted lexicographically; a record
    whose Jacobian is singular at the converged point is flagged
    ``degenerate`` rather than raising.
    """
    if fp.domain is None:
        raise ValueError("locate_critical_points needs a bounded domain")
    n = fp.dim
    lo, hi = fp.domain.bounds()
    scale = float(np.max(hi - lo))
    grads = [[jet_partial(j, c) for c in range(n)] for j in fp.Y]
    flat_grads = [g for row in grads for g in row]

    def Y(x):
        return np.array([eval_jet(j, x) for j in fp.Y])

    def J(x):
        return np.array([[eval_jet(g, x) for g in row] for row in grads])

    seeds = np.stack(np.meshgrid(*[np.linspace(a, b, seeds_per_axis) for a, b in zip(lo, hi)],
                                 indexing="ij"), axis=-1).reshape(-1, n)
    # all seeds iterate together; a seed freezes once converged or diverged
    x = seeds.copy()
    live = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        if not np.any(live):
            break
        xl = x[live]
        y = eval_jets(fp.Y, xl)
        jac = eval_jets(flat_grads, xl).reshape(len(xl), n, n)
        step = np.einsum("sij,sj->si", np.linalg.pinv(jac), y)
        new = xl - step
        done = ((np.linalg.norm(y, axis=-1) <= tol * 1e-3)
                | (np.linalg.norm(step, axis=-1)
                   <= 1e-15 * np.maximum(1.0, np.linalg.norm(new, axis=-1))))
        lost = (~np.all(np.isfinite(new), axis=-1)
                | (np.linalg.norm(new - seeds[live], axis=-1) > 4 * scale))
        new[lost] = np.nan
        x[live] = np.where(done[:, None], xl, new)
        idx = np.flatnonzero(live)
        live[idx[done | lost]] = False
    found = []
    for xi in x:
        if not np.all(np.isfinite(xi)):
            continue
        res = float(np.linalg.norm(Y(xi)))
        if res > tol:
            continue
        if not fp.domain.contains(xi, slack=1e-12 * scale):
            continue
        sv = np.linalg.svd(J(xi), compute_uv=False)
        # a zero of Y is only pinned down to about tol / sigma_min
        spread = min(tol / sv[-1], 1e-3 * scale) if sv[-1] > 0 else 1e-3 * scale
        radius = max(10 * tol, 1e-8 * scale, spread)
        if any(np.linalg.norm(xi - np.asarray(p.point)) <= radius for p in found):
            continue
        degenerate = bool(sv[-1] <= max(sv[0] / cond_bound, np.sqrt(tol) * max(1.0, sv[0])))
        found.append(CriticalPoint(tuple(float(v) for v in xi), res, degenerate))
    return sorted(found, key=lambda p: p.point)
