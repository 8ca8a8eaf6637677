"""Gluing local metrics into a global field, and the extension formula.

All metric fields here are upper-index (``g^{ab}``, the solution of
``X^a = g^{ab} Y_b``) unless a name says ``lower``.  The extension formula
works with the lower-index metric ``g_{ab}`` and ``Y_b = g_{ab} X^a``; the two
pictures meet through an explicit matrix inverse.
"""
import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .critical import (MetricSeries, RadiusWarning, _ray_directions, build_metric_series,
                       check_positivity_region, convergence_radius_l1, eval_metric_series,
                       first_failure_radius)
from .errors import (ConditionThreeViolated, CoverageGap, DegenerateForm,
                     NonPositivePairing, OrderExceeded)
from .jets import (Domain, FieldPair, field_spec_dict, locate_critical_points,
                   parse_field_spec)
from .noncritical import PAIRING_TOL, build_noncritical_metric

CRITICAL = "critical"
NONCRITICAL = "noncritical"
EXTERIOR = "exterior"


# --------------------------------------------------------------------------
# bumps


def ball_bump(r):
    """``exp(1 - 1/(1 - r^2))`` for ``r < 1``, else 0 (C-infinity, equals 1 at 0)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    ri = r[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ri * ri))
    return out


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    s = 1.0 - t
    b = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return a / (a + b)


def plateau_bump(r, inner=0.5):
    """1 for ``r <= inner``, 0 for ``r >= 1``, C-infinity in between."""
    r = np.asarray(r, dtype=float)
    return 1.0 - smooth_step((r - inner) / (1.0 - inner))


@dataclass(frozen=True, eq=False)
class Chart:
    """A chart of the atlas.

    ``critical`` charts carry a metric series and a ball bump of ``radius``.
    ``noncritical`` charts use the pointwise construction with a ball bump.
    ``exterior`` is a non-critical chart whose weight vanishes on the balls of
    radius ``hole_radii / 2`` around ``holes`` and equals 1 outside the balls of
    radius ``hole_radii``.
    """

    kind: str
    center: np.ndarray = None
    radius: float = None
    series: MetricSeries = None
    holes: np.ndarray = None
    hole_radii: np.ndarray = None

    def to_dict(self):
        doc = {"kind": self.kind}
        if self.center is not None:
            doc["center"] = [float(v) for v in self.center]
        if self.radius is not None:
            doc["radius"] = float(self.radius)
        if self.series is not None:
            doc["series"] = self.series.to_dict()
        if self.holes is not None:
            doc["holes"] = np.asarray(self.holes).tolist()
            doc["hole_radii"] = np.asarray(self.hole_radii).tolist()
        return doc

    @classmethod
    def from_dict(cls, doc):
        kind = doc["kind"]
        center = np.asarray(doc["center"], dtype=float) if "center" in doc else None
        series = MetricSeries.from_dict(doc["series"]) if "series" in doc else None
        holes = np.asarray(doc["holes"], dtype=float) if "holes" in doc else None
        radii = np.asarray(doc["hole_radii"], dtype=float) if "hole_radii" in doc else None
        return cls(kind, center, doc.get("radius"), series, holes, radii)


def critical_chart(series, radius):
    return Chart(CRITICAL, np.asarray(series.base_point, dtype=float), float(radius), series)


def noncritical_chart(center, radius):
    return Chart(NONCRITICAL, np.asarray(center, dtype=float), float(radius))


def exterior_chart(holes, hole_radii):
    return Chart(EXTERIOR, holes=np.asarray(holes, dtype=float).reshape(len(hole_radii), -1),
                 hole_radii=np.asarray(hole_radii, dtype=float))


def bump_weight(chart, x):
    """Unnormalised weight of ``chart`` at points ``x`` (shape ``(..., n)``)."""
    x = np.asarray(x, dtype=float)
    if chart.kind == EXTERIOR:
        w = np.ones(x.shape[:-1])
        for c, r in zip(chart.holes, chart.hole_radii):
            d = np.linalg.norm(x - c, axis=-1) / r
            w = w * smooth_step(2.0 * d - 1.0)
        return w
    r = np.linalg.norm(x - chart.center, axis=-1) / chart.radius
    return ball_bump(r)


# --------------------------------------------------------------------------
# global metric


def _noncritical_at(fp, pts):
    xs = fp.eval_X(pts)
    ys = fp.eval_Y(pts)
    out = np.empty((pts.shape[0], fp.dim, fp.dim))
    for i in range(pts.shape[0]):
        out[i] = build_noncritical_metric(xs[i], ys[i], point=pts[i]).G_std
    return out


@dataclass(frozen=True, eq=False)
class GlobalMetric:
    """Normalised convex combination of chart metrics."""

    fp: FieldPair
    charts: tuple
    domain: Domain = None

    @property
    def dim(self):
        return self.fp.dim

    def weights(self, x):
        """Normalised weights ``(..., n_charts)``; rows with no cover are zero."""
        x = np.asarray(x, dtype=float)
        raw = np.stack([bump_weight(c, x) for c in self.charts], axis=-1)
        total = raw.sum(axis=-1, keepdims=True)
        return np.divide(raw, total, out=np.zeros_like(raw), where=total > 0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(-1, self.dim)
        w = self.weights(pts)
        if np.any(w.sum(axis=-1) == 0):
            bad = pts[w.sum(axis=-1) == 0]
            raise CoverageGap(f"{len(bad)} points are not covered by any chart",
                              bad.tolist())
        out = np.zeros((pts.shape[0], self.dim, self.dim))
        for k, chart in enumerate(self.charts):
            active = w[:, k] > 0
            if not np.any(active):
                continue
            sub = pts[active]
            if chart.kind == CRITICAL:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RadiusWarning)
                    g = eval_metric_series(chart.series, sub)
            else:
                g = _noncritical_at(self.fp, sub)
            out[active] += w[active, k, None, None] * g
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out[0] if single else out.reshape(x.shape[:-1] + (self.dim, self.dim))

    def to_dict(self):
        return {"field": field_spec_dict(self.fp),
                "charts": [c.to_dict() for c in self.charts]}

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        fp = parse_field_spec(doc["field"])
        return cls(fp, tuple(Chart.from_dict(c) for c in doc["charts"]), fp.domain)


def assemble_global(charts, fp, domain=None, grid=16):
    """Glue ``charts`` into a :class:`GlobalMetric` after a coverage check."""
    domain = domain if domain is not None else fp.domain
    gm = GlobalMetric(fp, tuple(charts), domain)
    if domain is not None:
        pts = domain.grid(grid)
        raw = np.stack([bump_weight(c, pts) for c in gm.charts], axis=-1).sum(axis=-1)
        gaps = pts[raw <= 0]
        if len(gaps):
            raise CoverageGap(f"{len(gaps)} of {len(pts)} sample points are uncovered",
                              gaps.tolist())
    return gm


# --------------------------------------------------------------------------
# automatic atlas


@dataclass(frozen=True)
class AtlasSettings:
    order: int = 6
    tol_residual: float = 1e-8
    n_directions: int = 32
    steps: int = 64
    seed: int = 0
    seeds_per_axis: int = 9


def series_residual(ms, fp, pts):
    """``|g^{ab} Y_b - X^a|`` (max over components) of the series metric."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RadiusWarning)
        g = eval_metric_series(ms, pts)
    res = np.einsum("...ab,...b->...a", g, fp.eval_Y(pts)) - fp.eval_X(pts)
    return np.max(np.abs(res), axis=-1)


def field_scale(fp, pts):
    return max(1.0, float(np.max(np.abs(fp.eval_X(pts)))),
               float(np.max(np.abs(fp.eval_Y(pts)))))


def critical_series(fp, point, order):
    """Series of order ``order`` expanded at ``point`` (polynomial fields are padded)."""
    local = fp.recentered(point)
    if local.order < order + 1:
        local = local.padded(order + 1)
    return build_metric_series(local, order)


def critical_radius(ms, fp, domain, settings, cap):
    """Radius of the critical chart: positivity, convergence and residual limits."""
    dirs = _ray_directions(fp.dim, settings.n_directions, settings.seed)
    pos = check_positivity_region(ms, cap, settings.n_directions, settings.steps,
                                  settings.seed)
    conv = convergence_radius_l1(ms) / np.sqrt(fp.dim)
    scale = field_scale(fp, domain.grid(5)) if domain is not None else 1.0
    limit = 0.1 * settings.tol_residual * scale

    def small(points):
        return series_residual(ms, fp, points) <= limit

    res = first_failure_radius(small, dirs, ms.base_point, cap, settings.steps)
    radius = min(0.9 * pos if pos < cap else cap, conv, res)
    return float(radius), {"positivity": pos, "convergence": float(conv), "residual": res}


def build_atlas(fp, settings=AtlasSettings()):
    """Critical charts at every zero of ``Y`` plus one exterior chart.

    When a single critical chart already covers the whole domain the exterior
    chart is omitted.
    """
    domain = fp.domain
    if domain is None:
        raise ValueError("an atlas needs a bounded domain")
    crit = locate_critical_points(fp, seeds_per_axis=settings.seeds_per_axis)
    for c in crit:
        if c.degenerate:
            raise DegenerateForm(f"critical point {list(c.point)} is degenerate")
    points = [np.asarray(c.point) for c in crit]
    charts, info = [], []
    for i, p in enumerate(points):
        cap = 1.05 * domain.outradius_from(p)
        others = [np.linalg.norm(p - q) for j, q in enumerate(points) if j != i]
        if others:
            cap = min(cap, 0.5 * min(others))
        ms = critical_series(fp, p, settings.order)
        radius, why = critical_radius(ms, fp, domain, settings, cap)
        if radius <= 0:
            raise ConditionThreeViolated(f"no usable neighbourhood at {p.tolist()}",
                                         ms.base_result)
        charts.append(critical_chart(ms, radius))
        info.append({"point": p.tolist(), "radius": radius, "limits": why})
    covers = (len(charts) == 1 and charts[0].radius > domain.outradius_from(points[0]))
    if not covers:
        if charts:
            charts.append(exterior_chart([c.center for c in charts],
                                         [c.radius for c in charts]))
        else:
            charts.append(Chart(EXTERIOR, holes=np.zeros((0, fp.dim)),
                                hole_radii=np.zeros(0)))
    return charts, info


def build_global_metric(fp, settings=AtlasSettings(), grid=16):
    charts, info = build_atlas(fp, settings)
    return assemble_global(charts, fp, fp.domain, grid), info


# --------------------------------------------------------------------------
# verification


def verify_global(gm, fp, grid=16, smoothness_order=0, probe_points=4, h=1e-3):
    """Residual, eigenvalue, pairing and coverage report on a domain grid."""
    domain = gm.domain if gm.domain is not None else fp.domain
    pts = domain.grid(grid)
    pairing = fp.pairing(pts)
    ys = fp.eval_Y(pts)
    xs = fp.eval_X(pts)
    ynorm = np.linalg.norm(ys, axis=-1)
    crit = ynorm == 0
    bad = (~crit) & (pairing <= PAIRING_TOL * np.linalg.norm(xs, axis=-1) * ynorm)
    report = {"grid_per_axis": grid, "n_points": int(len(pts)),
              "condition_i_violations": int(np.sum(bad))}
    if np.any(bad):
        report.update(max_residual=None, min_eigenvalue=None, passed=False,
                      first_violation=pts[bad][0].tolist())
        return report
    g = gm(pts)
    res = np.einsum("...ab,...b->...a", g, ys) - xs
    scale = max(1.0, float(np.max(np.abs(xs))),
                float(np.max(np.abs(g))) * float(np.max(np.abs(ys))))
    w = gm.weights(pts)
    report.update(
        max_residual=float(np.max(np.abs(res))),
        scale=scale,
        min_eigenvalue=float(np.min(np.linalg.eigvalsh(g))),
        max_asymmetry=float(np.max(np.abs(g - np.swapaxes(g, -1, -2)))),
        coverage=[int(np.sum(w[:, k] > 0)) for k in range(len(gm.charts))],
        chart_kinds=[c.kind for c in gm.charts])
    if smoothness_order:
        report["smoothness"] = smoothness_probes(gm, pts, smoothness_order, probe_points, h)
    return report


def smoothness_probes(gm, pts, order, count=4, h=1e-3):
    """Finite-difference derivatives of ``g`` along axis 0 with Richardson refinement.

    For each probe point and derivative order the table records the
    estimate at steps ``h`` and ``h/2`` and their gap.
    """
    from math import comb

    idx = np.linspace(0, len(pts) - 1, count).astype(int)
    n = gm.dim
    e = np.zeros(n)
    e[0] = 1.0
    table = []
    for i in idx:
        x = pts[i]
        for k in range(1, order + 1):
            ests = []
            for step in (h, h / 2):
                offs = np.array([(k / 2.0 - j) * step for j in range(k + 1)])
                vals = gm(x + offs[:, None] * e)
                coeff = np.array([(-1) ** j * comb(k, j) for j in range(k + 1)])
                ests.append(np.tensordot(coeff, vals, axes=1) / step**k)
            table.append({"point": x.tolist(), "order": k,
                          "max_abs": float(np.max(np.abs(ests[1]))),
                          "refinement_gap": float(np.max(np.abs(ests[1] - ests[0])))})
    return table


def samples_csv(gm, pts):
    """CSV text: coordinates then the upper triangle of ``g^{ab}``."""
    g = gm(pts)
    n = gm.dim
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(n)]
               + [f"g{a}{b}" for a in range(n) for b in range(a, n)])
    for x, m in zip(pts, g):
        w.writerow([repr(float(v)) for v in x]
                   + [repr(float(m[a, b])) for a in range(n) for b in range(a, n)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# extension of a background metric (lower indices)


@dataclass(frozen=True, eq=False)
class ExtensionField:
    """``gt_{ab} = g_{ab} + (R_a Y_b + R_b Y_a)/(X.Y) - (R.X) Y_a Y_b/(X.Y)^2``.

    ``background`` maps points ``(m, n)`` to lower-index metrics ``(m, n, n)``.
    At the critical points listed in ``critical`` the value is fixed to the
    matching ``critical_metrics`` entry.
    """

    background: object
    fp: FieldPair
    critical: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    critical_metrics: np.ndarray = None
    pairing_tol: float = PAIRING_TOL

    def deficit(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = self.background(x)
        return self.fp.eval_Y(x) - np.einsum("mab,ma->mb", g, self.fp.eval_X(x))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        X = self.fp.eval_X(pts)
        Y = self.fp.eval_Y(pts)
        g = self.background(pts)
        out = np.array(g, dtype=float, copy=True)
        at_crit = np.zeros(len(pts), dtype=bool)
        if self.critical.size:
            for c, gc in zip(self.critical, self.critical_metrics):
                hit = np.all(pts == c, axis=-1)
                out[hit] = gc
                at_crit |= hit
        live = ~at_crit
        xy = np.sum(X * Y, axis=-1)
        bad = live & ~(xy > self.pairing_tol * np.linalg.norm(X, axis=-1)
                       * np.linalg.norm(Y, axis=-1))
        if np.any(bad):
            p = pts[bad][0]
            raise NonPositivePairing(f"<X, Y> <= 0 at {p.tolist()}", p, float(xy[bad][0]))
        R = Y[live] - np.einsum("mab,ma->mb", g[live], X[live])
        s = xy[live][:, None, None]
        RY = R[:, :, None] * Y[live][:, None, :]
        rx = np.sum(R * X[live], axis=-1)[:, None, None]
        out[live] = (g[live] + (RY + np.swapaxes(RY, -1, -2)) / s
                     - rx * Y[live][:, :, None] * Y[live][:, None, :] / s**2)
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out[0] if single else out


def continuous_extension(background, fp, critical=(), critical_metrics=()):
    crit = np.asarray(critical, dtype=float).reshape(len(critical), -1) if len(critical) \
        else np.zeros((0, 0))
    mets = np.asarray(critical_metrics, dtype=float) if len(critical_metrics) else None
    return ExtensionField(background, fp, crit, mets)


def example_counterexample_fields(order=1):
    """``X = Y = x`` in the plane on the unit box."""
    spec = {"dim": 2, "order": order,
            "domain": {"box": {"min": [-1, -1], "max": [1, 1]}},
            "X": [{"component": 0, "monomial": [1, 0], "coefficient": 1},
                  {"component": 1, "monomial": [0, 1], "coefficient": 1}],
            "Y": [{"component": 0, "monomial": [1, 0], "coefficient": 1},
                  {"component": 1, "monomial": [0, 1], "coefficient": 1}]}
    return parse_field_spec(spec)


def counterexample_background(x):
    """Lower-index metric ``[[1 + x2, 0], [0, 1]]`` (positive for ``x2 > -1``)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = np.zeros(x.shape[:-1] + (2, 2))
    g[..., 0, 0] = 1.0 + x[..., 1]
    g[..., 1, 1] = 1.0
    return g


def counterexample_extension():
    fp = example_counterexample_fields()
    return continuous_extension(counterexample_background, fp, [[0.0, 0.0]], [np.eye(2)])


def _richardson_d1(f, x, h):
    """Fourth-order central difference of ``f`` along axis 0."""
    e = np.array([h, 0.0])
    d_h = (f(x + e) - f(x - e)) / (2 * h)
    d_2h = (f(x + 2 * e) - f(x - 2 * e)) / (4 * h)
    return (4 * d_h - d_2h) / 3


def counterexample_probe(grid=64, t_min=1e-3, t_max=1e-1, point=(1.0, 1.0)):
    """Directional limits at the origin of ``d_1 gt_11`` for the two-dimensional example.

    The limit along each ray is the Richardson-refined central difference at
    distance ``t_min`` from the origin with step ``t_min / grid``.  ``t_max``
    is only recorded.
    """
    ext = counterexample_extension()

    def g11(x):
        return float(ext(x)[0, 0])

    rays = {"x2=0": np.array([1.0, 0.0]), "x2=x1": np.array([1.0, 1.0])}
    limits = {name: float(_richardson_d1(g11, t_min * u, t_min / grid))
              for name, u in rays.items()}
    gap = abs(limits["x2=0"] - limits["x2=x1"])
    return {"limits": limits,
            "limit_gap": gap,
            "non_differentiable": bool(gap > 1e-2),
            "g11_at_point": {"point": list(point), "value": g11(np.asarray(point, dtype=float))},
            "grid": grid, "t_min": t_min, "t_max": t_max}


# --------------------------------------------------------------------------
# C^k background


@dataclass(frozen=True, eq=False)
class CkBackground:
    """Lower-index metric: inverse of the order-``k`` series near each critical
    point, blended into the identity with plateau bumps."""

    series: tuple
    radii: tuple
    dim: int
    k: int

    def weights(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return [plateau_bump(np.linalg.norm(x - ms.base_point, axis=-1) / r)
                for ms, r in zip(self.series, self.radii)]

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[:-1] + (self.dim, self.dim))
        rest = np.ones(x.shape[:-1])
        for ms, w in zip(self.series, self.weights(x)):
            active = w > 0
            if np.any(active):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RadiusWarning)
                    g_up = eval_metric_series(ms, x[active])
                out[active] += w[active, None, None] * np.linalg.inv(g_up)
            rest = rest - w
        out += rest[..., None, None] * np.eye(self.dim)
        return out

    def critical_metrics(self):
        return [np.linalg.inv(ms.g_bar) for ms in self.series]


def ck_background(fp, k, radius=None, settings=AtlasSettings()):
    """Background whose deficit vanishes to order ``k + 1`` at each critical point."""
    if fp.order < k + 1 and fp.domain is None:
        raise OrderExceeded(f"need field jets of order {k + 1}")
    if fp.domain is not None:
        points = [np.asarray(c.point) for c in
                  locate_critical_points(fp, seeds_per_axis=settings.seeds_per_axis)]
    else:
        points = [fp.base_point]
    series, radii = [], []
    for i, p in enumerate(points):
        ms = critical_series(fp, p, k)
        if radius is None:
            cap = domain_cap(fp, p, points, i)
            r = 0.9 * check_positivity_region(ms, cap, settings.n_directions, settings.steps,
                                              settings.seed)
        else:
            r = radius
        series.append(ms)
        radii.append(float(r))
    return CkBackground(tuple(series), tuple(radii), fp.dim, k)


def domain_cap(fp, p, points, i):
    cap = fp.domain.outradius_from(p) if fp.domain is not None else 1.0
    others = [np.linalg.norm(p - q) for j, q in enumerate(points) if j != i]
    return min([cap] + [0.5 * d for d in others])


def deficit_slope(background, fp, center, r_min=1e-3, r_max=1e-2, n_radii=8,
                  n_rays=8, seed=0):
    """Smallest log-log slope of ``|Y - g X|`` against the distance to ``center``."""
    rng = np.random.default_rng(seed)
    rs = np.geomspace(r_min, r_max, n_radii)
    slopes = []
    for _ in range(n_rays):
        u = rng.normal(size=fp.dim)
        u /= np.linalg.norm(u)
        pts = center + rs[:, None] * u
        X = fp.eval_X(pts)
        R = fp.eval_Y(pts) - np.einsum("mab,ma->mb", background(pts), X)
        norms = np.linalg.norm(R, axis=-1)
        if np.all(norms == 0):
            slopes.append(np.inf)
            continue
        slopes.append(float(np.polyfit(np.log(rs), np.log(norms), 1)[0]))
    return float(min(slopes))
