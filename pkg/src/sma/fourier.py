"""Centered 2D DFT of motion-vector frames, low-frequency weighting and the
amplitude/phase (local) refinement losses with their analytic gradients.

Spectra are unnormalized forward DFTs shifted so DC sits at ``(H//2, W//2)``;
the inverse carries the ``1/(H*W)`` factor.  Every function transforms the
last two axes and broadcasts over the rest.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import check_same_shape

EPS_MAG = 1e-12
DEFAULT_DELTA = 0.05


@dataclass(frozen=True)
class ComplexSpectrum:
    values: np.ndarray  # complex, centered

    @property
    def re(self):
        return self.values.real

    @property
    def im(self):
        return self.values.imag

    @property
    def amplitude(self):
        return np.abs(self.values)

    @property
    def phase(self):
        """Four-quadrant phase in (-pi, pi]."""
        ph = np.arctan2(self.im, self.re)
        # arctan2 yields -pi for (negative real, -0.0 imaginary)
        return np.where(ph == -np.pi, np.pi, ph)


def dft2(frame):
    v = np.asarray(frame, dtype=np.float64)
    if v.ndim < 2 or min(v.shape[-2:]) < 2:
        raise ValueError(f"frames must be at least 2x2, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite values in frame")
    return ComplexSpectrum(np.fft.fftshift(np.fft.fft2(v), axes=(-2, -1)))


def idft2(spec):
    values = spec.values if isinstance(spec, ComplexSpectrum) else np.asarray(spec)
    return np.fft.ifft2(np.fft.ifftshift(values, axes=(-2, -1))).real


def freq_weight(H, W, delta=DEFAULT_DELTA):
    """Radially decreasing weight about the centered DC; zero on row/column 0."""
    if H < 2 or W < 2:
        raise ValueError(f"weight grid must be at least 2x2, got {H}x{W}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    a = np.arange(H, dtype=np.float64)[:, None]
    b = np.arange(W, dtype=np.float64)[None, :]
    r2 = (a - H / 2) ** 2 + (b - W / 2) ** 2
    w = ((H / 2) ** 2 + (W / 2) ** 2) ** delta - r2 ** delta + 1.0
    w[0, :] = 0.0
    w[:, 0] = 0.0
    return w


def wrap_phase(d):
    """Map angles to (-pi, pi]."""
    return d - 2 * np.pi * np.ceil((d - np.pi) / (2 * np.pi))


def _spectra(m_ref, m_pred, w):
    m_ref = np.asarray(m_ref, dtype=np.float64)
    m_pred = np.asarray(m_pred, dtype=np.float64)
    check_same_shape(m_ref, m_pred, "motion vector sequences")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != m_ref.shape[-2:]:
        raise ValueError(f"weight map shape {w.shape} != frame shape {m_ref.shape[-2:]}")
    return dft2(m_ref), dft2(m_pred), w


def _phase_terms(s_ref, s_pred):
    defined = (s_ref.amplitude >= EPS_MAG) | (s_pred.amplitude >= EPS_MAG)
    dphi = wrap_phase(s_ref.phase - s_pred.phase)
    return defined, dphi


def local_amp_loss(m_ref, m_pred, w):
    s_ref, s_pred, w = _spectra(m_ref, m_pred, w)
    return float(np.mean(w * np.abs(s_ref.amplitude - s_pred.amplitude)))


def local_phase_loss(m_ref, m_pred, w):
    """Weighted mean of wrapped phase differences over cells where phase is defined."""
    s_ref, s_pred, w = _spectra(m_ref, m_pred, w)
    defined, dphi = _phase_terms(s_ref, s_pred)
    count = np.count_nonzero(defined)
    if count == 0:
        return 0.0
    return float(np.sum(np.where(defined, w * np.abs(dphi), 0.0)) / count)


def _pullback(g_re, g_im):
    """Gradient w.r.t. real frames from gradients w.r.t. centered (Re, Im)."""
    G = np.fft.ifftshift(g_re + 1j * g_im, axes=(-2, -1))
    H, W = G.shape[-2:]
    return np.fft.ifft2(G).real * (H * W)


def local_amp_grad(m_ref, m_pred, w):
    s_ref, s_pred, w = _spectra(m_ref, m_pred, w)
    amp = s_pred.amplitude
    g_amp = w * np.sign(amp - s_ref.amplitude) / amp.size
    denom = np.maximum(amp, EPS_MAG)
    return _pullback(g_amp * s_pred.re / denom, g_amp * s_pred.im / denom)


def local_phase_grad(m_ref, m_pred, w):
    s_ref, s_pred, w = _spectra(m_ref, m_pred, w)
    defined, dphi = _phase_terms(s_ref, s_pred)
    count = np.count_nonzero(defined)
    if count == 0:
        return np.zeros_like(np.asarray(m_pred, dtype=np.float64))
    # d|wrap(phi_ref - phi_pred)| / d phi_pred
    g_phi = np.where(defined, -w * np.sign(dphi), 0.0) / count
    denom = np.maximum(s_pred.amplitude ** 2, EPS_MAG)
    return _pullback(-g_phi * s_pred.im / denom, g_phi * s_pred.re / denom)


def local_loss_grad(m_ref, m_pred, w):
    """Gradient of ``local_amp_loss + local_phase_loss`` w.r.t. ``m_pred``."""
    return local_amp_grad(m_ref, m_pred, w) + local_phase_grad(m_ref, m_pred, w)


def radius_map(H, W):
    a = np.arange(H)[:, None] - H / 2
    b = np.arange(W)[None, :] - W / 2
    return np.sqrt(a ** 2 + b ** 2)


def hf_energy(m, radius=None):
    """Summed squared amplitude over centered cells farther than ``radius`` from DC.

    ``radius`` defaults to ``min(H, W) / 4``.
    """
    m = np.asarray(m, dtype=np.float64)
    H, W = m.shape[-2:]
    if radius is None:
        radius = min(H, W) / 4
    mask = radius_map(H, W) > radius
    return float(np.sum(dft2(m).amplitude ** 2 * mask))


def spectrum_rows(mv, channel=0):
    """Rows ``(frame, a, b, amplitude, phase)`` in centered coordinates."""
    spec = dft2(np.asarray(mv, dtype=np.float64)[:, channel])
    amp, ph = spec.amplitude, spec.phase
    rows = []
    for n in range(amp.shape[0]):
        for a in range(amp.shape[1]):
            for b in range(amp.shape[2]):
                rows.append((n, a, b, float(amp[n, a, b]), float(ph[n, a, b])))
    return rows
