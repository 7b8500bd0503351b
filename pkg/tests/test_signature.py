from __future__ import annotations

from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sigfit.errors import ConfigurationError, SizeError
from sigfit.grid import GridFunction, GridSpec, get_test_function, sample
from sigfit.signature import (
    SignatureSpec,
    apply_signature,
    apply_signature_batch,
    biharmonic,
    forward_diff,
    invert_differences,
    per_axis_signature,
    sigma_matrix,
    signature_1d,
    signature_operator,
)


def _stencil_oracle(v, k):
    # direct binomial sum, independent of the repeated-difference code
    n = len(v) - k
    return np.array([sum((-1) ** (k - j) * comb(k, j) * v[i + j] for j in range(k + 1)) for i in range(n)])


def test_forward_diff_examples():
    np.testing.assert_array_equal(forward_diff([0.0, 1.0], 1), [1.0])
    np.testing.assert_array_equal(forward_diff([1.0, 2.0, 4.0], 2), [1.0])
    x = np.linspace(0, 1, 30)
    p = 3 - x + 2 * x**2 - 5 * x**4
    assert np.max(np.abs(forward_diff(p, 5))) < 1e-12


def test_forward_diff_too_short():
    with pytest.raises(SizeError):
        forward_diff([1.0, 2.0], 2)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(7, 30), elements=st.floats(-1e3, 1e3)), st.integers(0, 6))
def test_forward_diff_matches_binomial_sum(v, k):
    np.testing.assert_allclose(forward_diff(v, k), _stencil_oracle(v, k), atol=1e-9 * (1 + np.abs(v).max()) * 2**k)


@settings(max_examples=30, deadline=None)
@given(
    arrays(float, 12, elements=st.floats(-10, 10)),
    arrays(float, 12, elements=st.floats(-10, 10)),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
def test_signature_linearity(f, g, a, b):
    spec = GridSpec(1, 12, pad=5)
    F, G = GridFunction.from_interior(spec, f), GridFunction.from_interior(spec, g)
    H = GridFunction.from_interior(spec, a * f + b * g)
    lhs = signature_1d(H, 5).values
    rhs = a * signature_1d(F, 5).values + b * signature_1d(G, 5).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def test_signature_1d_length_and_padding_check():
    spec = GridSpec(1, 21, pad=5)
    g = sample(get_test_function("example1d"), spec)
    s = signature_1d(g, 5)
    # padded length N + 2k minus k
    assert s.values.shape == (21 + 5,)
    with pytest.raises(ConfigurationError):
        signature_1d(g.repad(4), 5)


def test_signature_decay_rate():
    tf = get_test_function("smooth1d")
    k = 5
    maxima = []
    for N in (51, 101, 201):
        g = sample(tf, GridSpec(1, N, pad=k))
        maxima.append(np.max(np.abs(forward_diff(g.interior, k))))
    ratios = np.array(maxima[:-1]) / np.array(maxima[1:])
    assert np.all(ratios >= 2 ** (k - 0.5))


def test_example1d_interior_signature_magnitude():
    # away from 0, s and 1 the fifth differences at h = 0.01 are about 1e-6
    g = sample(get_test_function("example1d"), GridSpec(1, 101, pad=5))
    s = signature_1d(g, 5).values
    x_win = (np.arange(len(s)) - 5) / 100.0  # left end of each window
    away = (x_win > 0.05) & (x_win < 0.40) | (x_win > 0.55) & (x_win < 0.90)
    assert 1e-8 < np.max(np.abs(s[away])) < 1e-5
    assert np.max(np.abs(s)) > 0.1


def test_biharmonic_annihilates_cubics():
    spec = GridSpec(2, 15, pad=2)
    X, Y = spec.mesh()
    cubic = 1 + X - 2 * Y + X * Y - 3 * X**2 * Y + Y**3 + 0.5 * X**3
    s = biharmonic(GridFunction.from_interior(spec, cubic)).values
    # interior rows/columns: stencil touches only data
    assert np.max(np.abs(s[4:-4, 4:-4])) < 1e-12


def test_biharmonic_of_quartic_monomial():
    spec = GridSpec(2, 21, pad=2)
    X, _ = spec.mesh()
    s = biharmonic(GridFunction.from_interior(spec, X**4)).values
    np.testing.assert_allclose(s[4:-4, 4:-4], 24 * spec.h**4, rtol=1e-8)


def test_biharmonic_stencil_weights():
    spec = GridSpec(2, 9, pad=2)
    delta = np.zeros(spec.interior_shape)
    delta[4, 4] = 1.0
    s = biharmonic(GridFunction.from_interior(spec, delta)).values
    c = 4  # output index equals the grid index of the centre
    assert s[c, c] == 20
    assert s[c + 1, c] == s[c, c - 1] == -8
    assert s[c + 1, c + 1] == 2
    assert s[c + 2, c] == 1
    assert np.count_nonzero(s) == 13


def test_biharmonic_padding_requirement():
    spec = GridSpec(2, 9, pad=1)
    with pytest.raises(ConfigurationError):
        biharmonic(GridFunction.zeros(spec))


def test_per_axis_signature_examples():
    spec = GridSpec(3, 9, pad=4)
    X, Y, Z = spec.mesh()
    s = per_axis_signature(GridFunction.from_interior(spec, X * Y * Z), 4)
    bx, by, bz = s.blocks
    # windows 4..8 along the differenced axis touch data only
    assert max(np.abs(bx[4:-4]).max(), np.abs(by[:, 4:-4]).max(), np.abs(bz[:, :, 4:-4]).max()) < 1e-12
    s = per_axis_signature(GridFunction.from_interior(spec, X**4), 4)
    bx, by, bz = s.blocks
    np.testing.assert_allclose(bx[4:-4], 24 * spec.h**4, rtol=1e-8)
    assert np.abs(by[:, 4:-4]).max() < 1e-14 and np.abs(bz[:, :, 4:-4]).max() < 1e-14
    with pytest.raises(ConfigurationError):
        per_axis_signature(GridFunction.zeros(spec.with_pad(3)), 4)


@pytest.mark.parametrize(
    "dim,spec",
    [(1, SignatureSpec("forward_diff", 5)), (2, SignatureSpec("biharmonic")), (3, SignatureSpec("per_axis_diff", 4)), (2, SignatureSpec("per_axis_diff", 3))],
)
def test_operator_matches_stencil(dim, spec):
    grid = GridSpec(dim, {1: 17, 2: 9, 3: 6}[dim], pad=spec.reach)
    rng = np.random.default_rng(dim)
    g = GridFunction.from_interior(grid, rng.standard_normal(grid.interior_shape))
    L = signature_operator(spec, grid)
    np.testing.assert_allclose(L @ g.interior.ravel(), apply_signature(g, spec).vector(), atol=1e-12)
    batch = apply_signature_batch(g.values[None], spec, grid)[0]
    np.testing.assert_allclose(batch, apply_signature(g, spec).vector(), atol=1e-12)


def test_h_power_scaling():
    grid = GridSpec(1, 11, pad=3)
    g = sample(get_test_function("smooth1d"), grid)
    raw = apply_signature(g, SignatureSpec("forward_diff", 3)).values
    scaled = apply_signature(g, SignatureSpec("forward_diff", 3, "h_power")).values
    np.testing.assert_allclose(scaled, raw / grid.h**3)


def test_invert_differences_examples():
    np.testing.assert_array_equal(invert_differences([1.0, 1.0, 1.0], 1), [0, 1, 2, 3])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), arrays(float, st.integers(3, 25), elements=st.floats(-100, 100)))
def test_invert_round_trip(k, tail):
    g = np.concatenate([np.zeros(k), tail])
    back = invert_differences(forward_diff(g, k), k)
    np.testing.assert_allclose(back, g, atol=1e-9 * (1 + np.abs(g).max()) * 4**k)
    d = np.random.default_rng(k).standard_normal(len(tail))
    np.testing.assert_allclose(forward_diff(invert_differences(d, k), k), d, atol=1e-9 * 4**k * len(d) ** k)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_inversion_growth_bound(k):
    # |d| = h^alpha gives max |g| <= N^k h^alpha
    for N in (20, 40, 80):
        h, alpha = 1.0 / (N - 1), 4.0
        d = np.full(N, h**alpha)
        g = invert_differences(d, k)
        assert np.max(np.abs(g)) <= N**k * h**alpha * (1 + 1e-12)
    # one order lost per inversion step: g grows like h^(alpha - k)
    sizes = [np.max(np.abs(invert_differences(np.full(N, (1.0 / (N - 1)) ** 4), k))) for N in (41, 81)]
    assert np.log2(sizes[0] / sizes[1]) == pytest.approx(4 - k, abs=0.15)


def test_sigma_matrix_k3_columns():
    S = sigma_matrix(8, 3)
    # column i holds -1, 3, -3, 1 in rows i-2 .. i+1
    np.testing.assert_array_equal(S[1:5, 3], [-1, 3, -3, 1])
    assert np.count_nonzero(S[:, 3]) == 4
