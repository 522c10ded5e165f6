"""Video tensors, frame residuals ("motion vectors") and per-pixel series.

A video is a float64 ``ndarray`` of shape ``(N, C, H, W)``.  A motion-vector
sequence has the same layout with ``N - 1`` entries, entry ``n`` being
``frame[n + 1] - frame[n]``.
"""

import numpy as np

__all__ = [
    "ShapeError",
    "TooFewFramesError",
    "as_video",
    "check_same_shape",
    "motion_vectors",
    "pixel_series",
]


class ShapeError(ValueError):
    """Raised when tensor dimensions are invalid or do not match."""


class TooFewFramesError(ShapeError):
    pass


def as_video(data, min_frames=1):
    """Validate ``data`` and return it as a contiguous float64 (N, C, H, W) array.

    3D input ``(N, H, W)`` is promoted to a single channel.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[:, None, :, :]
    if arr.ndim != 4:
        raise ShapeError(f"expected a (N, C, H, W) tensor, got shape {arr.shape}")
    if arr.shape[0] < min_frames:
        raise TooFewFramesError(
            f"need at least {min_frames} frames, got {arr.shape[0]}")
    if min(arr.shape[1:]) < 1:
        raise ShapeError(f"empty channel/spatial dimension in shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    return np.ascontiguousarray(arr)


def check_same_shape(a, b, what="inputs"):
    if a.shape != b.shape:
        raise ShapeError(f"{what} have mismatched shapes {a.shape} vs {b.shape}")


def motion_vectors(video):
    """Frame residuals ``video[n + 1] - video[n]`` for ``n = 0 .. N - 2``."""
    v = as_video(video)
    if v.shape[0] < 2:
        raise TooFewFramesError(
            f"motion vectors need at least 2 frames, got {v.shape[0]}")
    return v[1:] - v[:-1]


def motion_vectors_adjoint(grad):
    """Adjoint of :func:`motion_vectors`.

    Maps a gradient w.r.t. the ``N - 1`` residuals to a gradient w.r.t. the
    ``N`` frames.
    """
    g = np.asarray(grad, dtype=np.float64)
    out = np.zeros((g.shape[0] + 1,) + g.shape[1:])
    out[1:] += g
    out[:-1] -= g
    return out


def pixel_series(mv, c, y, x):
    """Temporal series of motion vectors at one channel/pixel location."""
    m = np.asarray(mv, dtype=np.float64)
    _, C, H, W = m.shape
    for name, idx, size in (("c", c, C), ("y", y, H), ("x", x, W)):
        if not 0 <= idx < size:
            raise IndexError(f"index {name}={idx} out of range [0, {size})")
    return m[:, c, y, x].copy()
