"""Central finite-difference checks of the analytic SMA gradients.

Coordinates whose perturbation could cross a kink of an L1 term are masked
out: a coordinate is kept only if every loss-term argument it influences is
farther than ``threshold`` from its kink.
"""

import numpy as np

from . import fourier, wavelet
from .objective import SmaConfig, sma_grad, sma_loss
from .tensor import motion_vectors


def central_differences(f, x, h=1e-5, mask=None):
    """Central-difference gradient of scalar ``f`` at ``x`` (masked entries left 0)."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    keep = np.ones(flat.size, bool) if mask is None else np.asarray(mask).reshape(-1)
    for i in np.flatnonzero(keep):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def global_safe(m_ref, m_pred, levels=None, threshold=1e-3):
    """Per-coordinate mask: all wavelet coefficients of the pixel are off their kink."""
    levels = levels or wavelet.auto_levels(m_ref.shape[0])
    diff = wavelet.dwt1d(m_pred, levels).flat() - wavelet.dwt1d(m_ref, levels).flat()
    # coefficients built only from a replicated pad sample are identically zero
    rows = wavelet.dwt1d(np.eye(m_pred.shape[0]), levels).flat()
    live = np.any(rows != 0, axis=1)
    ok = np.all(np.abs(diff[live]) > threshold, axis=0)
    return np.broadcast_to(ok, m_pred.shape).copy()


def self_conjugate(H, W):
    """Centered cells whose frequency equals its own negative (DC, Nyquist)."""
    ka = (np.arange(H) - H // 2) % H
    kb = (np.arange(W) - W // 2) % W
    return ((2 * ka) % H == 0)[:, None] & ((2 * kb) % W == 0)[None, :]


def local_safe(m_ref, m_pred, w, threshold=1e-3):
    """Per-coordinate mask: every weighted cell of the frame is off its kinks."""
    s_ref, s_pred = fourier.dft2(m_ref), fourier.dft2(m_pred)
    dphi = np.abs(fourier.wrap_phase(s_ref.phase - s_pred.phase))
    H, W = m_pred.shape[-2:]
    # phase is pinned to {0, pi} on self-conjugate cells of a real frame
    pinned = self_conjugate(H, W)
    bad = ((s_pred.amplitude <= threshold)
           | (np.abs(s_ref.amplitude - s_pred.amplitude) <= threshold)
           | (~pinned & ((dphi <= threshold) | (dphi >= np.pi - threshold))))
    bad &= w > 0
    ok = ~np.any(bad, axis=(-2, -1))
    return np.broadcast_to(ok[..., None, None], m_pred.shape).copy()


def align_safe(m_ref, m_pred, kind, threshold=1e-3):
    if kind == "l1":
        return np.abs(m_pred - m_ref) > threshold
    if kind == "cosine":
        nr = np.linalg.norm(m_ref.reshape(m_ref.shape[0], -1), axis=1)
        np_ = np.linalg.norm(m_pred.reshape(m_pred.shape[0], -1), axis=1)
        ok = (nr > threshold) & (np_ > threshold)
        return np.broadcast_to(ok[:, None, None, None], m_pred.shape).copy()
    return np.ones(m_pred.shape, bool)


def sma_safe(m_ref, m_pred, cfg, threshold=1e-3):
    mask = align_safe(m_ref, m_pred, cfg.align_kind, threshold)
    if cfg.lambda_g:
        mask &= global_safe(m_ref, m_pred, cfg.resolve_levels(m_ref.shape[0]), threshold)
    if cfg.lambda_l:
        w = fourier.freq_weight(m_ref.shape[-2], m_ref.shape[-1], cfg.delta)
        mask &= local_safe(m_ref, m_pred, w, threshold)
    return mask


def relative_errors(g_analytic, g_numeric, floor=1e-12):
    """Per-entry ``|a - n| / max(|a|, |n|, floor)``."""
    den = np.maximum(np.maximum(np.abs(g_analytic), np.abs(g_numeric)), floor)
    return np.abs(g_analytic - g_numeric) / den


def random_instance(seed, frames=8, size=16, channels=1):
    """Motion vectors of two independent random videos."""
    rng = np.random.default_rng(seed)
    shape = (frames, channels, size, size)
    return motion_vectors(rng.standard_normal(shape)), motion_vectors(rng.standard_normal(shape))


def check_sma_grad(m_ref, m_pred, cfg=None, h=1e-5, threshold=1e-3, rel_floor=1e-3):
    """Compare :func:`sma_grad` with central differences of ``sma_loss().total``.

    Returns a dict with the max relative error over unmasked coordinates.
    Denominators are floored at ``rel_floor * max|grad|``: central differences
    carry ~1e-10 absolute roundoff, which would otherwise dominate the
    relative error of near-zero gradient components.
    """
    cfg = cfg or SmaConfig()
    mask = sma_safe(m_ref, m_pred, cfg, threshold)
    g_a = sma_grad(m_ref, m_pred, cfg)
    g_n = central_differences(lambda p: sma_loss(m_ref, p, cfg).total, m_pred, h, mask)
    floor = max(rel_floor * float(np.max(np.abs(g_a))), 1e-12)
    rel = relative_errors(g_a[mask], g_n[mask], floor)
    return {
        "checked": int(mask.sum()),
        "total": int(mask.size),
        "max_rel_error": float(rel.max()) if rel.size else 0.0,
        "max_abs_error": float(np.max(np.abs(g_a[mask] - g_n[mask]))) if rel.size else 0.0,
    }
