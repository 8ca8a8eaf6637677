import csv
import io
from pathlib import Path

import numpy as np
import pytest
from support import box, manufactured_pair

from gradmetric.assembler import (AtlasSettings, GlobalMetric, assemble_global, ball_bump,
                                  build_global_metric, ck_background, continuous_extension,
                                  counterexample_extension, counterexample_probe,
                                  critical_chart, critical_series, deficit_slope,
                                  noncritical_chart, plateau_bump, samples_csv, smooth_step,
                                  verify_global)
from gradmetric.errors import CoverageGap, NonPositivePairing
from gradmetric.jets import Domain, parse_field_spec

DATA = Path(__file__).resolve().parent.parent / "data"


def load(name):
    return parse_field_spec((DATA / name).read_text())


def test_ball_bump_values():
    assert ball_bump(np.array([0.0]))[0] == 1.0
    assert np.all(ball_bump(np.array([1.0, 1.5, 3.0])) == 0.0)
    r = np.linspace(0, 0.999, 200)
    v = ball_bump(r)
    assert np.all(np.diff(v) < 0) and np.all(v > 0)


def test_ball_bump_flat_at_the_edge():
    # value and finite-difference derivatives vanish faster than any power of 1 - r
    h = 1e-5
    for delta in (1e-2, 5e-3):
        r = 1.0 - delta + h * np.arange(-2, 3)
        v = ball_bump(r)
        d1 = (v[3] - v[1]) / (2 * h)
        d2 = (v[3] - 2 * v[2] + v[1]) / h**2
        for k in range(1, 4):
            assert max(abs(v[2]), abs(d1), abs(d2)) / delta**k < 1e-6


def test_smooth_step_and_plateau():
    t = np.linspace(-1, 2, 301)
    s = smooth_step(t)
    assert np.all(s[t <= 0] == 0.0) and np.all(s[t >= 1] == 1.0)
    assert np.all(np.diff(s) >= 0)
    np.testing.assert_allclose(smooth_step(0.5), 0.5)
    np.testing.assert_allclose(s + smooth_step(1 - t), 1.0, atol=1e-15)
    p = plateau_bump(np.array([0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_array_equal(p, [1.0, 1.0, 0.0, 0.0])


def sloped_pair():
    spec = {"dim": 2, "order": 1,
            "domain": {"box": {"min": [-0.5, -0.2], "max": [0.5, 0.2]}},
            "X": [{"component": 0, "monomial": [0, 0], "coefficient": 2},
                  {"component": 0, "monomial": [1, 0], "coefficient": 1},
                  {"component": 1, "monomial": [0, 0], "coefficient": 1}],
            "Y": [{"component": 0, "monomial": [0, 0], "coefficient": 1},
                  {"component": 1, "monomial": [0, 1], "coefficient": 0.1}]}
    return parse_field_spec(spec)


def test_overlapping_noncritical_charts():
    fp = sloped_pair()
    charts = [noncritical_chart([-0.3, 0.0], 0.6), noncritical_chart([0.3, 0.0], 0.6)]
    gm = assemble_global(charts, fp, grid=32)
    rep = verify_global(gm, fp, grid=32)
    assert rep["max_residual"] <= 1e-10
    assert rep["min_eigenvalue"] > 0
    assert rep["coverage"][0] > 0 and rep["coverage"][1] > 0
    pts = fp.domain.grid(32)
    w = gm.weights(pts)
    np.testing.assert_allclose(w.sum(axis=-1), 1.0, atol=1e-14)


def test_coverage_gap():
    fp = sloped_pair()
    with pytest.raises(CoverageGap) as err:
        assemble_global([noncritical_chart([-0.5, -0.2], 0.1)], fp, grid=8)
    assert err.value.points
    gm = GlobalMetric(fp, (noncritical_chart([0.0, 0.0], 0.1),), fp.domain)
    with pytest.raises(CoverageGap):
        gm(np.array([0.45, 0.0]))


def test_single_critical_chart_identity():
    fp = load("identity_2d.json")
    gm, info = build_global_metric(fp, AtlasSettings(), grid=16)
    assert [c.kind for c in gm.charts] == ["critical"]
    pts = fp.domain.grid(16)
    np.testing.assert_allclose(gm(pts), np.broadcast_to(np.eye(2), (len(pts), 2, 2)),
                               atol=1e-14)


def test_manual_critical_chart():
    rng = np.random.default_rng(0)
    fp, _ = manufactured_pair(2, rng, 6, domain=box(2, 0.2))
    ms = critical_series(fp, np.zeros(2), 10)
    gm = assemble_global([critical_chart(ms, 0.5)], fp, grid=8)
    rep = verify_global(gm, fp, grid=8)
    assert rep["max_residual"] <= 1e-8 * rep["scale"]


def test_manufactured_sample_builds():
    fp = load("manufactured_2d.json")
    gm, info = build_global_metric(fp, AtlasSettings(), grid=32)
    rep = verify_global(gm, fp, grid=32, smoothness_order=2)
    assert rep["condition_i_violations"] == 0
    assert rep["max_residual"] <= 1e-8 * rep["scale"]
    assert rep["min_eigenvalue"] > 0
    assert rep["max_asymmetry"] == 0.0
    assert "exterior" in rep["chart_kinds"]
    for row in rep["smoothness"]:
        assert np.isfinite(row["max_abs"])


def test_mis_signed_fields_flagged():
    fp = load("mis_signed_2d.json")
    gm = GlobalMetric(fp, (noncritical_chart([0.0, 0.0], 5.0),), fp.domain)
    rep = verify_global(gm, fp, grid=8)
    assert rep["condition_i_violations"] > 0 and rep["passed"] is False
    ext = continuous_extension(lambda x: np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)), fp)
    with pytest.raises(NonPositivePairing):
        ext(np.array([[0.3, 0.1]]))


def test_extension_solves_the_equation():
    rng = np.random.default_rng(1)
    fp, _ = manufactured_pair(3, rng, 3)
    B = rng.normal(size=(3, 3))
    B = B @ B.T + 3 * np.eye(3)

    def background(x):
        return np.broadcast_to(B, x.shape[:-1] + (3, 3))

    ext = continuous_extension(background, fp)
    pts = rng.uniform(-0.3, 0.3, size=(10_000, 3))
    g = ext(pts)
    res = np.einsum("mab,ma->mb", g, fp.eval_X(pts)) - fp.eval_Y(pts)
    assert np.max(np.abs(res)) <= 1e-10
    assert np.array_equal(g, np.swapaxes(g, -1, -2))


def test_extension_keeps_an_exact_background():
    fp = load("identity_2d.json")
    ext = continuous_extension(lambda x: np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)),
                               fp, [[0.0, 0.0]], [np.eye(2)])
    pts = np.random.default_rng(2).uniform(-1, 1, size=(500, 2))
    np.testing.assert_allclose(ext(pts), np.broadcast_to(np.eye(2), (500, 2, 2)), atol=1e-15)


def test_counterexample():
    ext = counterexample_extension()
    assert abs(ext(np.array([1.0, 1.0]))[0, 0] - 1.25) <= 1e-12
    np.testing.assert_array_equal(ext(np.zeros(2)), np.eye(2))
    # continuous at the origin: the correction is O(|x|)
    for t in (1e-2, 1e-4, 1e-6):
        for u in ([1.0, 0.0], [1.0, 1.0], [0.3, -0.8]):
            assert np.max(np.abs(ext(t * np.array(u)) - np.eye(2))) <= 3 * t
    probe = counterexample_probe()
    assert abs(probe["limits"]["x2=0"]) <= 1e-4
    assert abs(probe["limits"]["x2=x1"] + 0.5) <= 1e-4
    assert probe["non_differentiable"]


@pytest.mark.parametrize("k", [0, 1, 2])
def test_ck_background_deficit_order(k):
    fp = load("manufactured_2d.json")
    bg = ck_background(fp, k)
    slope = deficit_slope(bg, fp, bg.series[0].base_point)
    assert slope >= k + 2 - 0.2
    ext = continuous_extension(bg, fp, [ms.base_point for ms in bg.series],
                               bg.critical_metrics())
    pts = fp.domain.grid(9)
    pts = pts[np.linalg.norm(fp.eval_Y(pts), axis=-1) > 0]
    g = ext(pts)
    res = np.einsum("mab,ma->mb", g, fp.eval_X(pts)) - fp.eval_Y(pts)
    assert np.max(np.abs(res)) <= 1e-10


def test_csv_and_serialisation():
    fp = load("manufactured_2d.json")
    gm, _ = build_global_metric(fp, AtlasSettings(), grid=8)
    pts = fp.domain.grid(4)
    rows = list(csv.reader(io.StringIO(samples_csv(gm, pts))))
    assert rows[0] == ["x0", "x1", "g00", "g01", "g11"]
    assert len(rows) == 1 + len(pts)
    assert float(rows[1][2]) == gm(pts[0])[0, 0]
    back = GlobalMetric.from_dict(gm.to_dict())
    assert back.dumps() == gm.dumps()
    assert np.array_equal(back(pts), gm(pts))


def test_domain_ball_grid():
    d = Domain.ball([0.0, 0.0], 1.0)
    pts = d.grid(9)
    assert np.all(np.linalg.norm(pts, axis=-1) <= 1.0 + 1e-12)
