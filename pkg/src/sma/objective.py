"""Combined spectral motion alignment objective and its gradient."""

from dataclasses import asdict, dataclass

import numpy as np

from . import fourier, wavelet
from .io import dumps_json
from .tensor import check_same_shape, motion_vectors

ALIGN_KINDS = ("mse", "l1", "cosine")


@dataclass(frozen=True)
class SmaConfig:
    lambda_g: float = 0.4
    lambda_l: float = 0.2
    delta: float = 0.05
    levels: object = "auto"
    align_kind: str = "mse"

    def __post_init__(self):
        if self.lambda_g < 0 or self.lambda_l < 0:
            raise ValueError("loss weights must be non-negative")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.align_kind not in ALIGN_KINDS:
            raise ValueError(f"unknown align kind {self.align_kind!r}")
        if self.levels != "auto" and not (isinstance(self.levels, int) and self.levels >= 1):
            raise ValueError(f"levels must be 'auto' or a positive int, got {self.levels!r}")

    def resolve_levels(self, series_length):
        if self.levels == "auto":
            return wavelet.auto_levels(series_length)
        return self.levels

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LossBreakdown:
    l_align: float
    l_global: float
    l_local_amp: float
    l_local_phase: float
    total: float

    def to_dict(self, config=None):
        d = asdict(self)
        if config is not None:
            d["config"] = config.to_dict()
        return d

    def to_json(self, config=None):
        return dumps_json(self.to_dict(config))


def _frame_cosines(m_ref, m_pred):
    r = m_ref.reshape(m_ref.shape[0], -1)
    p = m_pred.reshape(m_pred.shape[0], -1)
    nr = np.linalg.norm(r, axis=1)
    np_ = np.linalg.norm(p, axis=1)
    dot = np.sum(r * p, axis=1)
    both_zero = (nr == 0) & (np_ == 0)
    one_zero = (nr == 0) ^ (np_ == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(nr * np_ > 0, dot / (nr * np_), 0.0)
    cos = np.where(both_zero, 1.0, cos)
    return r, p, nr, np_, cos, one_zero


def align_loss(m_ref, m_pred, kind="mse"):
    m_ref = np.asarray(m_ref, dtype=np.float64)
    m_pred = np.asarray(m_pred, dtype=np.float64)
    check_same_shape(m_ref, m_pred, "motion vector sequences")
    d = m_pred - m_ref
    if kind == "mse":
        return float(np.mean(d ** 2))
    if kind == "l1":
        return float(np.mean(np.abs(d)))
    if kind == "cosine":
        cos = _frame_cosines(m_ref, m_pred)[4]
        return float(np.mean(1.0 - cos))
    raise ValueError(f"unknown align kind {kind!r}")


def align_grad(m_ref, m_pred, kind="mse"):
    m_ref = np.asarray(m_ref, dtype=np.float64)
    m_pred = np.asarray(m_pred, dtype=np.float64)
    check_same_shape(m_ref, m_pred, "motion vector sequences")
    d = m_pred - m_ref
    if kind == "mse":
        return 2.0 * d / d.size
    if kind == "l1":
        return np.sign(d) / d.size
    if kind == "cosine":
        r, p, nr, np_, cos, _ = _frame_cosines(m_ref, m_pred)
        ok = (nr * np_ > 0)[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            g = -(r / (nr * np_)[:, None] - cos[:, None] * p / (np_ ** 2)[:, None])
        g = np.where(ok, g, 0.0) / r.shape[0]
        return g.reshape(m_pred.shape)
    raise ValueError(f"unknown align kind {kind!r}")


def sma_loss(m_ref, m_pred, cfg=None):
    cfg = cfg or SmaConfig()
    m_ref = np.asarray(m_ref, dtype=np.float64)
    m_pred = np.asarray(m_pred, dtype=np.float64)
    check_same_shape(m_ref, m_pred, "motion vector sequences")
    levels = cfg.resolve_levels(m_ref.shape[0])
    w = fourier.freq_weight(m_ref.shape[-2], m_ref.shape[-1], cfg.delta)
    l_align = align_loss(m_ref, m_pred, cfg.align_kind)
    l_global = wavelet.global_loss(m_ref, m_pred, levels)
    l_amp = fourier.local_amp_loss(m_ref, m_pred, w)
    l_phase = fourier.local_phase_loss(m_ref, m_pred, w)
    total = l_align + cfg.lambda_g * l_global + cfg.lambda_l * (l_amp + l_phase)
    return LossBreakdown(l_align, l_global, l_amp, l_phase, total)


def sma_grad(m_ref, m_pred, cfg=None):
    """Gradient of ``sma_loss(...).total`` with respect to ``m_pred``."""
    cfg = cfg or SmaConfig()
    m_ref = np.asarray(m_ref, dtype=np.float64)
    m_pred = np.asarray(m_pred, dtype=np.float64)
    check_same_shape(m_ref, m_pred, "motion vector sequences")
    g = align_grad(m_ref, m_pred, cfg.align_kind)
    if cfg.lambda_g:
        levels = cfg.resolve_levels(m_ref.shape[0])
        g = g + cfg.lambda_g * wavelet.global_loss_grad(m_ref, m_pred, levels)
    if cfg.lambda_l:
        w = fourier.freq_weight(m_ref.shape[-2], m_ref.shape[-1], cfg.delta)
        g = g + cfg.lambda_l * fourier.local_loss_grad(m_ref, m_pred, w)
    return g


def identity_features(video):
    return np.asarray(video, dtype=np.float64)


def avg_pool2(video):
    """2x2 average pooling over the spatial axes (odd trailing rows/cols dropped)."""
    v = np.asarray(video, dtype=np.float64)
    H, W = v.shape[-2] // 2 * 2, v.shape[-1] // 2 * 2
    v = v[..., :H, :W]
    return 0.25 * (v[..., 0::2, 0::2] + v[..., 1::2, 0::2]
                   + v[..., 0::2, 1::2] + v[..., 1::2, 1::2])


def feature_sma_loss(src, tgt, fmap=identity_features, cfg=None):
    """SMA objective on residuals of feature maps of two videos.

    The base term is ``align_loss`` on feature residuals; it stands in for a
    dedicated space-time feature loss, which callers may add separately.
    """
    f_src, f_tgt = fmap(src), fmap(tgt)
    if np.shape(f_src)[0] != np.shape(src)[0] or np.shape(f_tgt)[0] != np.shape(tgt)[0]:
        raise ValueError("feature map must preserve the frame count")
    return sma_loss(motion_vectors(f_src), motion_vectors(f_tgt), cfg)
