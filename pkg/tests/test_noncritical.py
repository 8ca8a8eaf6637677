import numpy as np
import pytest

from gradmetric.errors import NonPositivePairing, ZeroCovector
from gradmetric.noncritical import (build_noncritical_metric, complete_dual_frame,
                                    noncritical_metric_field)


def test_small_example():
    res = build_noncritical_metric([2.0, 1.0], [1.0, 0.0])
    np.testing.assert_allclose(res.G_std, [[2.0, 1.0], [1.0, 2.0]], atol=1e-15)
    np.testing.assert_allclose(res.G_std @ [1.0, 0.0], [2.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("c", [0.1, 1.0, 7.5])
def test_parallel_fields(c):
    res = build_noncritical_metric([c, 0.0], [1.0, 0.0])
    np.testing.assert_allclose(res.G_std, np.diag([c, c / 2]), atol=1e-14)


def test_frame_completion():
    frame = complete_dual_frame([0.0, 3.0])
    rows = frame.rows
    np.testing.assert_array_equal(rows[0], [0.0, 3.0])
    assert abs(rows[1] @ rows[0]) <= 1e-15
    assert abs(np.linalg.norm(rows[1]) - 1.0) <= 1e-15
    rng = np.random.default_rng(0)
    y = rng.normal(size=5)
    rows = complete_dual_frame(y).rows
    np.testing.assert_allclose(rows[1:] @ rows[1:].T, np.eye(4), atol=1e-14)
    np.testing.assert_allclose(rows[1:] @ y, 0.0, atol=1e-14)


def test_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(500):
        n = int(rng.integers(1, 7))
        y = rng.normal(size=n)
        x = rng.normal(size=n)
        if x @ y <= 0:
            x = x - 2 * (x @ y) / (y @ y) * y + 0.1 * y
        res = build_noncritical_metric(x, y)
        G = res.G_std
        assert np.array_equal(G, G.T)
        assert np.max(np.abs(G @ y - x)) <= 1e-10 * max(1.0, np.linalg.norm(x))
        assert np.min(np.linalg.eigvalsh(G)) > 0
        # in frame coordinates the form is bounded below by X1 / 2
        assert np.min(np.linalg.eigvalsh(res.G)) >= res.X1 / 2 * (1 - 1e-12)


def test_vectorised_field():
    rng = np.random.default_rng(2)
    y = rng.normal(size=(4, 3, 2))
    x = y * 2.0 + 0.1 * rng.normal(size=y.shape)
    G = noncritical_metric_field(x, y)
    assert G.shape == (4, 3, 2, 2)
    np.testing.assert_allclose(np.einsum("...ab,...b->...a", G, y), x, atol=1e-12)


def test_errors():
    with pytest.raises(ZeroCovector):
        complete_dual_frame([0.0, 0.0])
    with pytest.raises(NonPositivePairing) as err:
        build_noncritical_metric([-1.0, 0.0], [1.0, 0.0], point=[0.5, 0.5])
    cert = err.value.certificate()
    assert cert["condition"] == "i" and cert["pairing"] == -1.0
    with pytest.raises(NonPositivePairing):
        build_noncritical_metric([0.0, 1.0], [1.0, 0.0])
