import json
from math import factorial, sin

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradmetric.errors import BaseMismatch, OrderExceeded, SpecDimensionError, SpecParseError
from gradmetric.jets import (Domain, FieldPair, Jet, derivative_at_base, eval_jet, eval_jets,
                             jet_multiply, jet_partial, locate_critical_points,
                             parse_field_spec, recenter, serialize_field_spec)
from gradmetric.multiindex import multi_indices


def spec(dim, X, Y, order=1, domain=None):
    doc = {"dim": dim, "order": order, "X": X, "Y": Y}
    if domain is not None:
        doc["domain"] = domain
    return doc


def unit_terms(dim):
    return [{"component": i, "monomial": [int(i == j) for j in range(dim)], "coefficient": 1}
            for i in range(dim)]


def random_jet(rng, n, order, base=None):
    base = np.zeros(n) if base is None else base
    return Jet(n, order, base, rng.normal(size=len(multi_indices(n, order))))


def test_parse_identity_fields():
    fp = parse_field_spec(spec(1, unit_terms(1), unit_terms(1)))
    assert fp.X[0].as_dict() == {(1,): 1.0}
    assert fp.Y[0].as_dict() == {(1,): 1.0}
    fp2 = parse_field_spec(spec(2, unit_terms(2), unit_terms(2)))
    for j, e in zip(fp2.X, [(1, 0), (0, 1)]):
        assert j.as_dict() == {e: 1.0}


def test_parse_exact_decimals_and_fractions():
    doc = json.dumps(spec(1, [{"component": 0, "monomial": [1], "coefficient": 0.1}],
                          [{"component": 0, "monomial": [1], "coefficient": "1/3"}]))
    fp = parse_field_spec(doc)
    assert fp.X[0].coeff((1,)) == 0.1
    assert fp.Y[0].coeff((1,)) == 1 / 3


def test_round_trip():
    rng = np.random.default_rng(0)
    n, K = 2, 3
    X = tuple(random_jet(rng, n, K) for _ in range(n))
    Y = tuple(random_jet(rng, n, K) for _ in range(n))
    fp = FieldPair(n, X, Y, Domain.box([-1, -2], [1, 2]))
    back = parse_field_spec(serialize_field_spec(fp))
    for a, b in zip(fp.X + fp.Y, back.X + back.Y):
        assert np.array_equal(a.coeffs, b.coeffs)
    assert np.array_equal(back.domain.lo, fp.domain.lo)


@pytest.mark.parametrize("doc,err", [
    ("{not json", SpecParseError),
    ({"dim": 2, "order": 1, "X": [], "Y": []} | {"dim": "two"}, SpecParseError),
    (spec(2, [{"component": 2, "monomial": [1, 0], "coefficient": 1}], []), SpecDimensionError),
    (spec(2, [{"component": 0, "monomial": [1], "coefficient": 1}], []), SpecDimensionError),
    (spec(1, [{"component": 0, "monomial": [1], "coefficient": "abc"}], []), SpecParseError),
    (spec(1, [{"component": 0, "monomial": [1], "coefficient": 1}] * 2, []), SpecParseError),
    ({"dim": 1, "order": 1, "X": []}, SpecParseError),
])
def test_parse_errors(doc, err):
    with pytest.raises(err):
        parse_field_spec(doc)


def test_eval_examples():
    j = Jet.from_dict(1, 2, [0.0], {(0,): 1, (1,): 1, (2,): 1})
    assert eval_jet(j, [2.0]) == 7.0
    rng = np.random.default_rng(1)
    r = random_jet(rng, 3, 4, base=np.array([0.5, -1.0, 2.0]))
    assert eval_jet(r, r.base_point) == r.coeffs[0]


def test_eval_sine_jet():
    terms = {(k,): (-1) ** ((k - 1) // 2) / factorial(k) for k in range(1, 9, 2)}
    j = Jet.from_dict(1, 8, [0.0], terms)
    assert abs(eval_jet(j, [0.3]) - sin(0.3)) <= 1e-9


def test_eval_matches_naive_loop_bitwise():
    rng = np.random.default_rng(2)
    j = random_jet(rng, 3, 5, base=np.array([0.1, 0.2, -0.3]))
    x = np.array([0.7, -0.4, 0.25])
    dx = x - j.base_point
    acc = 0.0
    for c, m in zip(j.coeffs, j.monomials):
        mono = 1.0
        for i, k in enumerate(m):
            p = 1.0
            for _ in range(k):
                p = p * dx[i]
            if k:
                mono = mono * p
        acc = acc + c * mono
    assert eval_jet(j, x) == acc


def test_eval_jets_agrees_with_eval_jet():
    rng = np.random.default_rng(3)
    jets = [random_jet(rng, 2, 4) for _ in range(3)]
    pts = rng.normal(size=(7, 2))
    both = eval_jets(jets, pts)
    for k, j in enumerate(jets):
        assert np.array_equal(both[:, k], eval_jet(j, pts))


def test_derivative_at_base():
    j = Jet.from_dict(2, 3, [0, 0], {(2, 1): 1.0, (0, 0): 4.0})
    assert derivative_at_base(j, (0, 0)) == 4.0
    assert derivative_at_base(j, (2, 1)) == 2.0
    with pytest.raises(OrderExceeded):
        derivative_at_base(j, (2, 2))


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(4)
    j = random_jet(rng, 2, 4)
    h = 1e-3
    e0, e1 = np.array([h, 0.0]), np.array([0.0, h])
    f = lambda p: eval_jet(j, p)  # noqa: E731
    z = np.zeros(2)
    checks = {
        (1, 0): (f(z + e0) - f(z - e0)) / (2 * h),
        (0, 2): (f(z + e1) - 2 * f(z) + f(z - e1)) / h**2,
        (1, 1): (f(z + e0 + e1) - f(z + e0 - e1) - f(z - e0 + e1) + f(z - e0 - e1)) / (4 * h * h),
    }
    for m, fd in checks.items():
        exact = derivative_at_base(j, m)
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact)) * 10


def test_multiply_examples():
    one = Jet.from_dict(1, 2, [0.0], {(0,): 1.0})
    a = Jet.from_dict(1, 2, [0.0], {(0,): 1.0, (1,): 1.0})
    b = Jet.from_dict(1, 2, [0.0], {(0,): 1.0, (1,): -1.0})
    assert np.array_equal(jet_multiply(one, a).coeffs, a.coeffs)
    assert jet_multiply(a, b).as_dict() == {(0,): 1.0, (2,): -1.0}
    with pytest.raises(BaseMismatch):
        jet_multiply(a, Jet.from_dict(1, 2, [1.0], {(0,): 1.0}))


def test_multiply_pointwise_for_polynomials():
    rng = np.random.default_rng(5)
    n = 2
    a = Jet(n, 8, np.zeros(n), np.r_[rng.normal(size=15), np.zeros(30)])
    b = Jet(n, 8, np.zeros(n), np.r_[rng.normal(size=15), np.zeros(30)])
    p = jet_multiply(a, b)
    pts = rng.uniform(-0.5, 0.5, size=(20, n))
    np.testing.assert_allclose(eval_jet(p, pts), eval_jet(a, pts) * eval_jet(b, pts),
                               rtol=1e-10, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(1, 0), (0, 2), (1, 1), (2, 1), (0, 0)]))
def test_multiply_leibniz(seed, m):
    from math import comb
    rng = np.random.default_rng(seed)
    a = random_jet(rng, 2, 3)
    b = random_jet(rng, 2, 3)
    lhs = derivative_at_base(jet_multiply(a, b), m)
    rhs = 0.0
    for i in range(m[0] + 1):
        for k in range(m[1] + 1):
            rhs += (comb(m[0], i) * comb(m[1], k) * derivative_at_base(a, (i, k))
                    * derivative_at_base(b, (m[0] - i, m[1] - k)))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_partial_and_recenter():
    j = Jet.from_dict(2, 3, [0, 0], {(2, 1): 1.0, (1, 0): 3.0})
    d = jet_partial(j, 0)
    assert d.as_dict() == {(1, 1): 2.0, (0, 0): 3.0}
    r = recenter(j, np.array([0.5, -1.0]))
    pts = np.random.default_rng(6).normal(size=(10, 2))
    np.testing.assert_allclose(eval_jet(r, pts), eval_jet(j, pts), atol=1e-12)


def linear_pair(domain):
    return parse_field_spec(spec(2, unit_terms(2), unit_terms(2), domain=domain))


def test_locate_linear_field():
    fp = linear_pair({"box": {"min": [-1, -1], "max": [1, 1]}})
    pts = locate_critical_points(fp)
    assert len(pts) == 1
    assert np.linalg.norm(pts[0].point) <= 1e-12


def test_locate_no_zero():
    doc = spec(2, unit_terms(2), [{"component": 0, "monomial": [0, 0], "coefficient": 1},
                                  {"component": 0, "monomial": [2, 0], "coefficient": 1}],
               order=2, domain={"box": {"min": [-1, -1], "max": [1, 1]}})
    assert locate_critical_points(parse_field_spec(doc)) == []


def test_locate_double_well_gradient():
    # gradient of (x1^2 - 1)^2 + x2^2 = (4 x1^3 - 4 x1, 2 x2)
    Y = [{"component": 0, "monomial": [3, 0], "coefficient": 4},
         {"component": 0, "monomial": [1, 0], "coefficient": -4},
         {"component": 1, "monomial": [0, 1], "coefficient": 2}]
    doc = spec(2, unit_terms(2), Y, order=3, domain={"box": {"min": [-2, -2], "max": [2, 2]}})
    pts = sorted(p.point for p in locate_critical_points(parse_field_spec(doc)))
    expected = [(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]
    assert len(pts) == 3
    for p, e in zip(pts, expected):
        assert np.linalg.norm(np.subtract(p, e)) <= 1e-8


def test_locate_flags_degenerate():
    Y = [{"component": 0, "monomial": [3, 0], "coefficient": 1},
         {"component": 1, "monomial": [0, 1], "coefficient": 1}]
    doc = spec(2, unit_terms(2), Y, order=3, domain={"box": {"min": [-1, -1], "max": [1, 1]}})
    pts = locate_critical_points(parse_field_spec(doc), tol=1e-10)
    assert pts and all(p.degenerate for p in pts)


def test_permuted_relabels_coordinates():
    rng = np.random.default_rng(7)
    n = 3
    X = tuple(random_jet(rng, n, 2) for _ in range(n))
    Y = tuple(random_jet(rng, n, 2) for _ in range(n))
    fp = FieldPair(n, X, Y)
    perm = [2, 0, 1]
    q = fp.permuted(perm)
    x = rng.normal(size=n)
    # new coordinate i is old coordinate perm[i]: evaluate at the relabelled point
    np.testing.assert_allclose(q.eval_X(x[perm]), fp.eval_X(x)[perm], atol=1e-12)
