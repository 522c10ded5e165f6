"""Multi-level orthonormal Haar transform along the time axis, and the
wavelet-domain (global) motion alignment loss.

All transforms act on axis 0 and broadcast over trailing axes, so a whole
motion-vector sequence ``(N - 1, C, H, W)`` is decomposed pixel by pixel in
one call.  Odd-length levels are padded by repeating the last sample.
"""

import math
from dataclasses import dataclass

import numpy as np

from .tensor import check_same_shape

_S = 1.0 / math.sqrt(2.0)


def haar_filters():
    """Orthonormal Haar analysis filters ``(lowpass, highpass)``."""
    return np.array([_S, _S]), np.array([-_S, _S])


def auto_levels(series_length):
    if series_length < 2:
        raise ValueError(f"series length must be >= 2, got {series_length}")
    return math.ceil(math.log2(series_length))


def level_lengths(original_length, levels):
    """Signal length entering each level, before padding (``levels + 1`` entries)."""
    out = [original_length]
    for _ in range(levels):
        out.append((out[-1] + 1) // 2)
    return out


@dataclass
class WaveletCoefficients:
    """``detail[0]`` is level 1 (finest); ``approx`` belongs to the coarsest level."""

    detail: list
    approx: np.ndarray
    original_length: int

    @property
    def levels(self):
        return len(self.detail)

    def bands(self):
        """``(level, band, array)`` triples, finest detail first, approx last."""
        out = [(j + 1, "detail", d) for j, d in enumerate(self.detail)]
        out.append((self.levels, "approx", self.approx))
        return out

    def flat(self):
        """All coefficients stacked along axis 0."""
        return np.concatenate(list(self.detail) + [self.approx], axis=0)


def _check_levels(length, levels):
    top = auto_levels(length)
    if not (isinstance(levels, (int, np.integer)) and 1 <= levels <= top):
        raise ValueError(f"levels={levels!r} outside [1, {top}] for length {length}")
    return int(levels)


def dwt1d(x, levels=None):
    """Haar decomposition of ``x`` along axis 0.

    ``levels`` defaults to :func:`auto_levels` of the series length.
    """
    cur = np.asarray(x, dtype=np.float64)
    length = cur.shape[0]
    levels = auto_levels(length) if levels is None else _check_levels(length, levels)
    details = []
    for _ in range(levels):
        if cur.shape[0] % 2:
            cur = np.concatenate([cur, cur[-1:]], axis=0)
        even, odd = cur[0::2], cur[1::2]
        details.append((odd - even) * _S)
        cur = (even + odd) * _S
    return WaveletCoefficients(details, cur, length)


def _synthesize(coeffs, fold_padding):
    lengths = level_lengths(coeffs.original_length, coeffs.levels)
    cur = coeffs.approx
    for j in range(coeffs.levels - 1, -1, -1):
        d = coeffs.detail[j]
        if d.shape != cur.shape:
            raise ValueError(f"level {j + 1}: detail shape {d.shape} != approx shape {cur.shape}")
        out = np.empty((2 * cur.shape[0],) + cur.shape[1:])
        out[0::2] = (cur - d) * _S
        out[1::2] = (cur + d) * _S
        n = lengths[j]
        if out.shape[0] != n:
            # drop the replicated sample; the adjoint folds it back instead
            if fold_padding:
                out[n - 1] += out[n]
            out = out[:n]
        cur = out
    return cur


def idwt1d(coeffs):
    """Inverse of :func:`dwt1d`, removing padded samples."""
    expected = level_lengths(coeffs.original_length, coeffs.levels)
    if coeffs.approx.shape[0] != expected[-1]:
        raise ValueError(
            f"approx length {coeffs.approx.shape[0]} inconsistent with "
            f"original length {coeffs.original_length}")
    return _synthesize(coeffs, fold_padding=False)


def dwt1d_adjoint(coeffs):
    """Transpose of the (padded) analysis operator of :func:`dwt1d`."""
    return _synthesize(coeffs, fold_padding=True)


def _unflatten(flat, template):
    parts = []
    pos = 0
    for d in template.detail:
        parts.append(flat[pos:pos + d.shape[0]])
        pos += d.shape[0]
    return WaveletCoefficients(parts, flat[pos:], template.original_length)


def _resolve(m_ref, m_pred, levels):
    m_ref = np.asarray(m_ref, dtype=np.float64)
    m_pred = np.asarray(m_pred, dtype=np.float64)
    check_same_shape(m_ref, m_pred, "motion vector sequences")
    if m_ref.shape[0] < 2:
        raise ValueError("the wavelet term requires at least 2 motion frames")
    if levels is None or levels == "auto":
        levels = auto_levels(m_ref.shape[0])
    return m_ref, m_pred, levels


def global_loss(m_ref, m_pred, levels=None):
    """Mean absolute difference of all Haar coefficients over every pixel."""
    m_ref, m_pred, levels = _resolve(m_ref, m_pred, levels)
    diff = dwt1d(m_pred, levels).flat() - dwt1d(m_ref, levels).flat()
    return float(np.mean(np.abs(diff)))


def global_loss_grad(m_ref, m_pred, levels=None):
    """Gradient of :func:`global_loss` with respect to ``m_pred``."""
    m_ref, m_pred, levels = _resolve(m_ref, m_pred, levels)
    c_pred = dwt1d(m_pred, levels)
    diff = c_pred.flat() - dwt1d(m_ref, levels).flat()
    g = np.sign(diff) / diff.size
    return dwt1d_adjoint(_unflatten(g, c_pred))


def coefficient_rows(mv, levels=None):
    """Rows ``(pixel, level, band, k, value)`` for every coefficient of every pixel.

    ``pixel`` is the flat (c, y, x) index.
    """
    m = np.asarray(mv, dtype=np.float64)
    coeffs = dwt1d(m.reshape(m.shape[0], -1), levels)
    rows = []
    for level, band, arr in coeffs.bands():
        for p in range(arr.shape[1]):
            for k in range(arr.shape[0]):
                rows.append((p, level, band, k, float(arr[k, p])))
    rows.sort(key=lambda r: (r[0], r[1], r[2] == "approx", r[3]))
    return rows
