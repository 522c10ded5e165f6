import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sma.fourier import freq_weight, local_amp_loss
from sma.gradcheck import central_differences, global_safe, relative_errors
from sma.tensor import motion_vectors
from sma.transfer import SynthSpec, synth_video
from sma.wavelet import (WaveletCoefficients, auto_levels, coefficient_rows, dwt1d,
                         dwt1d_adjoint, global_loss, global_loss_grad, haar_filters, idwt1d)

R2 = math.sqrt(2.0)


def analysis_matrix(length, levels):
    """Oracle: the transform as an explicit product of pad and filter-bank matrices."""
    lo, hi = haar_filters()
    rows = []
    op = np.eye(length)
    for _ in range(levels):
        n = op.shape[0]
        if n % 2:
            pad = np.vstack([np.eye(n), np.eye(n)[-1:]])
            op = pad @ op
            n += 1
        A = np.zeros((n // 2, n))
        D = np.zeros((n // 2, n))
        for k in range(n // 2):
            A[k, 2 * k:2 * k + 2] = lo
            D[k, 2 * k:2 * k + 2] = hi
        rows.append(D @ op)
        op = A @ op
    rows.append(op)
    return np.vstack(rows)


def test_haar_filters():
    lo, hi = haar_filters()
    np.testing.assert_allclose(lo, [0.70710678, 0.70710678], atol=1e-8)
    np.testing.assert_allclose(hi, [-0.70710678, 0.70710678], atol=1e-8)
    assert lo @ lo == pytest.approx(1.0, abs=1e-15)
    assert hi @ hi == pytest.approx(1.0, abs=1e-15)
    assert lo @ hi == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n, levels", [(7, 3), (15, 4), (2, 1), (8, 3), (16, 4), (3, 2)])
def test_auto_levels(n, levels):
    assert auto_levels(n) == levels


def test_auto_levels_rejects_short():
    with pytest.raises(ValueError):
        auto_levels(1)


def test_dwt_constant():
    c = dwt1d(np.ones(4), 1)
    np.testing.assert_allclose(c.approx, [R2, R2], atol=1e-15)
    np.testing.assert_allclose(c.detail[0], [0, 0], atol=1e-15)


def test_dwt_worked_example():
    c = dwt1d(np.array([1.0, 2, 3, 4]), 1)
    np.testing.assert_allclose(c.approx, [2.12132034355964257, 4.94974746830583267], atol=1e-14)
    np.testing.assert_allclose(c.detail[0], [0.70710678118654752, 0.70710678118654752], atol=1e-14)
    np.testing.assert_allclose(idwt1d(c), [1, 2, 3, 4], atol=1e-14)


def test_dwt_odd_length_padding():
    c = dwt1d(np.array([1.0, 2, 3]), 1)
    np.testing.assert_allclose(c.approx, [2.12132034355964257, 4.24264068711928515], atol=1e-14)
    np.testing.assert_allclose(c.detail[0], [0.70710678118654752, 0.0], atol=1e-14)
    np.testing.assert_allclose(idwt1d(c), [1, 2, 3], atol=1e-14)


def test_levels_out_of_range():
    with pytest.raises(ValueError):
        dwt1d(np.zeros(7), 4)
    with pytest.raises(ValueError):
        dwt1d(np.zeros(7), 0)


@pytest.mark.parametrize("length", range(2, 17))
def test_matches_matrix_oracle(length, rng):
    x = rng.standard_normal(length)
    for levels in range(1, auto_levels(length) + 1):
        A = analysis_matrix(length, levels)
        np.testing.assert_allclose(dwt1d(x, levels).flat(), A @ x, atol=1e-12)
        # adjoint is the matrix transpose
        y = rng.standard_normal(A.shape[0])
        c = dwt1d(x, levels)
        parts, pos = [], 0
        for d in c.detail:
            parts.append(y[pos:pos + len(d)])
            pos += len(d)
        adj = dwt1d_adjoint(WaveletCoefficients(parts, y[pos:], length))
        np.testing.assert_allclose(adj, A.T @ y, atol=1e-12)


def test_zero_coefficients_give_zero_series():
    c = dwt1d(np.zeros(11), 3)
    c = WaveletCoefficients([np.zeros_like(d) for d in c.detail], np.zeros_like(c.approx), 11)
    assert not idwt1d(c).any()


def test_inconsistent_coefficients():
    c = dwt1d(np.arange(8.0), 2)
    with pytest.raises(ValueError):
        idwt1d(WaveletCoefficients(c.detail, c.approx[:1], 8))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 16), st.data())
def test_perfect_reconstruction(length, data):
    levels = data.draw(st.integers(1, auto_levels(length)))
    x = np.array(data.draw(st.lists(st.floats(-1e3, 1e3), min_size=length, max_size=length)))
    assert np.max(np.abs(idwt1d(dwt1d(x, levels)) - x), initial=0) <= 1e-9


@pytest.mark.parametrize("length", [2, 4, 8, 16])
def test_parseval_power_of_two(length, rng):
    x = rng.standard_normal(length)
    for levels in range(1, auto_levels(length) + 1):
        e = np.sum(dwt1d(x, levels).flat() ** 2)
        assert abs(e - np.sum(x ** 2)) / np.sum(x ** 2) <= 1e-9


def test_dwt_linear(rng):
    u, w = rng.standard_normal((2, 7, 3, 3))
    lhs = dwt1d(2.5 * u - 0.5 * w).flat()
    rhs = 2.5 * dwt1d(u).flat() - 0.5 * dwt1d(w).flat()
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_dwt_vectorized_matches_per_pixel(rng):
    m = rng.standard_normal((7, 2, 3, 4))
    flat = dwt1d(m).flat()
    for c in range(2):
        for y in range(3):
            for x in range(4):
                np.testing.assert_allclose(flat[:, c, y, x], dwt1d(m[:, c, y, x]).flat())


def _series(values):
    return np.asarray(values, dtype=float).reshape(-1, 1, 1, 1)


def test_global_loss_cases(rng):
    m = rng.standard_normal((7, 1, 4, 4))
    assert global_loss(m, m) == 0.0
    assert global_loss(m, -m) > 0
    ref = _series([1, 2, 3, 4])
    loss = global_loss(ref, ref + 1.0, levels=1)
    assert loss == pytest.approx(0.70710678118654752, abs=1e-14)


def test_global_loss_symmetric_and_definite(rng):
    a, b = rng.standard_normal((2, 7, 1, 3, 3))
    assert global_loss(a, b) == global_loss(b, a)
    assert global_loss(a, b) > 0


def test_global_grad_zero_at_match(rng):
    m = rng.standard_normal((7, 1, 4, 4))
    assert not global_loss_grad(m, m).any()


def test_global_grad_finite_differences():
    rng = np.random.default_rng(42)
    ref = motion_vectors(rng.standard_normal((8, 1, 8, 8)))
    pred = motion_vectors(rng.standard_normal((8, 1, 8, 8)))
    mask = global_safe(ref, pred)
    assert mask.mean() > 0.5
    g = global_loss_grad(ref, pred)
    fd = central_differences(lambda p: global_loss(ref, p), pred, 1e-5, mask)
    assert relative_errors(g[mask], fd[mask]).max() < 1e-4


def test_global_grad_scale_invariant(rng):
    ref, pred = rng.standard_normal((2, 7, 1, 4, 4))
    g1 = global_loss_grad(ref, pred)
    g2 = global_loss_grad(ref, ref + 3.7 * (pred - ref))
    np.testing.assert_array_equal(g1, g2)


def test_reversal_sensitivity():
    v, _ = synth_video(SynthSpec(frames=8, size=16, object_size=4, velocity=(1, 0)))
    m = motion_vectors(v)
    w = freq_weight(16, 16)
    assert global_loss(m, -m) > 0
    assert local_amp_loss(m, -m, w) == 0.0


def test_coefficient_rows():
    m = np.arange(7.0).reshape(7, 1, 1, 1)
    rows = coefficient_rows(m)
    assert len(rows) == 4 + 2 + 1 + 1
    assert {r[1] for r in rows} == {1, 2, 3}
    assert rows[-1][2] == "approx" and rows[-1][1] == 3
