from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev
from scipy.interpolate import BSpline

from sigfit.basis import (
    BSplineBasis,
    ChebyshevBasis,
    TensorBasis,
    basis_count,
    bspline_eval,
    chebyshev_tensor_eval,
    restrict,
)
from sigfit.errors import ConfigurationError


@pytest.mark.parametrize("m", [1, 2, 3, 4, 6])
@pytest.mark.parametrize("d", [0.1, 0.25, 1.0])
def test_bspline_matches_scipy(m, d):
    knots = -d * np.arange(m, -1, -1)
    ref = BSpline.basis_element(knots, extrapolate=False)
    x = np.linspace(-m * d + 1e-9, -1e-9, 257)
    np.testing.assert_allclose(bspline_eval(m, d, x), ref(x), atol=1e-14)
    outside = np.array([-m * d - 0.3 * d, -m * d, 0.2 * d, 5.0])
    assert np.all(bspline_eval(m, d, outside) == 0.0)


def test_order_one_half_open_support():
    assert bspline_eval(1, 0.5, 0.0) == 1.0
    assert bspline_eval(1, 0.5, -0.5) == 0.0


@pytest.mark.parametrize("m", [2, 4, 6])
def test_cubic_b_spline_peak(m):
    # centred uniform B-spline: peak values 1, 2/3, 11/20 for m = 2, 4, 6
    peak = {2: 1.0, 4: 2.0 / 3.0, 6: 11.0 / 20.0}[m]
    assert bspline_eval(m, 1.0, -m / 2) == pytest.approx(peak, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.sampled_from([0.05, 0.1, 0.2, 0.25, 0.5]), st.floats(0.0, 1.0))
def test_partition_of_unity(m, d, x):
    if m == 1 and x == 0.0:
        # indicators of (-d, 0] leave the left end uncovered
        x = 1e-12
    vals = BSplineBasis(m, d)(np.array([x]))
    assert vals.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(vals >= -1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.floats(-10, 10))
def test_bspline_symmetry(m, t):
    # symmetric about the centre -m d / 2
    d = 0.3
    c = -m * d / 2
    assert bspline_eval(m, d, c + t * d) == pytest.approx(float(bspline_eval(m, d, c - t * d)), abs=1e-13)


def test_basis_count():
    assert basis_count(0.1, 6) == 15
    assert basis_count(0.25, 4) == 7
    with pytest.raises(ConfigurationError):
        basis_count(0.3, 4)


def test_every_shift_meets_unit_interval():
    b = BSplineBasis(6, 0.1)
    vals = b(np.linspace(0, 1, 2001))
    assert np.all(vals.max(axis=0) > 0)
    # and no further shift does
    extra = bspline_eval(6, 0.1, np.linspace(0, 1, 2001) - (b.count + 1) * 0.1)
    assert np.all(extra == 0.0)


def test_chebyshev_values_match_numpy():
    x = np.linspace(0, 1, 11)
    V = ChebyshevBasis(5)(x)
    for j in range(6):
        c = np.zeros(6)
        c[j] = 1.0
        np.testing.assert_allclose(V[:, j], chebyshev.chebval(2 * x - 1, c), atol=1e-14)
    np.testing.assert_allclose(V[0], (-1.0) ** np.arange(6))


def test_chebyshev_tensor_eval_order():
    pt = (0.3, 0.8, 0.1)
    v = chebyshev_tensor_eval(2, pt)
    t = [ChebyshevBasis(2)(np.array([p]))[0] for p in pt]
    # last axis fastest
    assert v[1] == pytest.approx(t[0][0] * t[1][0] * t[2][1])
    assert v[9] == pytest.approx(t[0][1] * t[1][0] * t[2][0])
    assert v.size == 27


@pytest.mark.parametrize("factor", [BSplineBasis(4, 0.25), ChebyshevBasis(3)])
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_tensor_routes_agree(factor, dim):
    tb = TensorBasis(factor, dim)
    axis = np.linspace(0, 1, 5)
    G = tb.grid_matrix(axis)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), -1).reshape(-1, dim)
    np.testing.assert_allclose(G, tb(mesh), atol=1e-14)
    coef = np.random.default_rng(dim).standard_normal(tb.size)
    np.testing.assert_allclose(tb.contract_grid(coef, axis).ravel(), G @ coef, atol=1e-12)


def test_multi_index_roundtrip():
    tb = TensorBasis(ChebyshevBasis(4), 3)
    for flat in (0, 7, 124):
        assert np.ravel_multi_index(tb.multi_index(flat), (5, 5, 5)) == flat


def test_restrict_zeroes_other_region():
    N = 9
    labels = np.ones((N, N), int)
    labels[:, 6:] = 2
    lab = SimpleNamespace(labels=labels)
    tb = TensorBasis(BSplineBasis(4, 0.25), 2)
    r2 = restrict(tb, lab, 2)
    rows = labels.ravel() == 1
    assert np.all(r2.values[rows] == 0.0)
    full = tb.grid_matrix(np.linspace(0, 1, N))
    np.testing.assert_array_equal(r2.values[~rows], full[~rows])
    # shifts supported entirely left of x = 0.75 vanish on region 2
    assert len(r2.zero_columns) > 0
    with pytest.raises(ConfigurationError):
        restrict(tb, lab, 1, grid_values=full[:-1])
