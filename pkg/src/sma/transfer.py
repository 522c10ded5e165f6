"""Synthetic motion videos, a phase-correlation displacement oracle and
pixel-space latent-optimization motion transfer driven by the SMA objective.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fourier
from .diffusion import (OracleDenoiser, ZeroDenoiser, denoised_motion_vectors,
                        forward_sample, frame_noise, make_schedule)
from .io import csv_text, dumps_json
from .objective import SmaConfig, sma_grad, sma_loss
from .tensor import as_video, check_same_shape, motion_vectors, motion_vectors_adjoint

PATTERNS = ("translate-square", "translate-impulse", "rotate-bar")
BACKGROUNDS = ("flat", "texture")
ARTIFACTS = ("none", "fence", "stair", "flicker")
INITS = ("random", "static-first-frame", "copy-target")
OPTIMIZERS = ("adam", "sgd")


class NumericalError(RuntimeError):
    """Optimization produced a non-finite loss."""


class DisplacementError(ValueError):
    """Displacement is undefined (frame without spatial structure)."""


@dataclass(frozen=True)
class SynthSpec:
    pattern: str = "translate-square"
    frames: int = 8
    size: int = 32
    velocity: tuple = (2, 0)
    object_size: int = 8
    background: str = "flat"
    artifact: str = "none"
    artifact_strength: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if self.background not in BACKGROUNDS:
            raise ValueError(f"unknown background {self.background!r}")
        if self.artifact not in ARTIFACTS:
            raise ValueError(f"unknown artifact {self.artifact!r}")
        if self.frames < 2 or self.size < 2:
            raise ValueError("need frames >= 2 and size >= 2")
        if not 1 <= self.object_size <= self.size:
            raise ValueError(f"object_size must be in [1, {self.size}]")
        if self.pattern != "rotate-bar" and any(int(v) != v for v in self.velocity):
            raise ValueError("translate patterns need integer velocity")

    def to_dict(self):
        return {"pattern": self.pattern, "frames": self.frames, "size": self.size,
                "velocity": [float(v) for v in self.velocity],
                "object_size": self.object_size, "background": self.background,
                "artifact": self.artifact, "artifact_strength": self.artifact_strength,
                "seed": self.seed}


def _rng(seed, *key):
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence([int(seed) & (2**64 - 1), *key])))


def _texture(size, rng):
    # smooth random texture: a few low-frequency cosines
    y, x = np.mgrid[0:size, 0:size] / size
    tex = np.zeros((size, size))
    for _ in range(4):
        fy, fx = rng.integers(1, 4, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        tex += np.cos(2 * np.pi * (fy * y + fx * x) + phase)
    return 0.25 + 0.05 * tex


def _bar(size, length, angle_deg):
    c = (size - 1) / 2
    y, x = np.mgrid[0:size, 0:size] - c
    th = np.deg2rad(angle_deg)
    along = x * np.cos(th) + y * np.sin(th)
    across = -x * np.sin(th) + y * np.cos(th)
    return ((np.abs(along) <= length / 2) & (np.abs(across) <= 1.0)).astype(np.float64)


def synth_video(spec):
    """Render ``spec`` into an ``(N, 1, H, W)`` video.

    Returns ``(video, velocity)``.  Translate patterns shift the whole scene
    circularly by ``velocity = (dx, dy)`` pixels per frame (dx along columns).
    ``rotate-bar`` rotates a centred bar by ``velocity[0]`` degrees per frame.
    """
    n, size = spec.frames, spec.size
    rng = _rng(spec.seed, 0)
    bg = _texture(size, rng) if spec.background == "texture" else np.zeros((size, size))
    frames = np.empty((n, size, size))
    if spec.pattern == "rotate-bar":
        for i in range(n):
            frames[i] = np.maximum(bg, _bar(size, spec.object_size, i * spec.velocity[0]))
    else:
        base = bg.copy()
        lo = (size - spec.object_size) // 2
        if spec.pattern == "translate-square":
            base[lo:lo + spec.object_size, lo:lo + spec.object_size] = 1.0
        else:
            base[size // 2, size // 2] = 1.0
        dx, dy = (int(v) for v in spec.velocity)
        for i in range(n):
            frames[i] = np.roll(base, (i * dy, i * dx), axis=(0, 1))

    art_rng = _rng(spec.seed, 1)
    s = spec.artifact_strength
    y, x = np.mgrid[0:size, 0:size]
    for i in range(n):
        if spec.artifact == "fence":
            phase = art_rng.integers(0, 2)
            frames[i] += s * ((x + phase) % 2)
        elif spec.artifact == "stair":
            offset = art_rng.integers(0, 4)
            frames[i] += s * (((x + y + offset) // 2) % 2)
        elif spec.artifact == "flicker":
            frames[i] += s * art_rng.standard_normal()
    return frames[:, None], tuple(float(v) for v in spec.velocity)


def _signed(idx, n):
    return idx - n if idx > n // 2 else idx


def estimate_displacement(video):
    """Integer (dx, dy) between consecutive frames by phase correlation.

    Channels are averaged.  Shifts are reported in (-size/2, size/2].
    """
    v = as_video(video, min_frames=2).mean(axis=1)
    spectra = np.fft.fft2(v)
    H, W = v.shape[-2:]
    out = []
    for n in range(v.shape[0] - 1):
        f1, f2 = spectra[n], spectra[n + 1]
        for f in (f1, f2):
            ac = np.abs(f).copy()
            ac[0, 0] = 0.0
            if ac.max() <= 1e-9 * max(abs(f[0, 0]), 1.0):
                raise DisplacementError(f"frame pair {n}: frame has no spatial structure")
        cross = f2 * np.conj(f1)
        mag = np.abs(cross)
        cross = np.where(mag > 1e-12 * mag.max(), cross / np.maximum(mag, 1e-300), 0.0)
        corr = np.fft.ifft2(cross).real
        iy, ix = np.unravel_index(np.argmax(corr), corr.shape)
        out.append((_signed(int(ix), W), _signed(int(iy), H)))
    return out


def displacement_error(video, velocity):
    est = np.asarray(estimate_displacement(video), dtype=np.float64)
    return float(np.mean(np.linalg.norm(est - np.asarray(velocity, dtype=np.float64), axis=1)))


def hf_energy_ratio(m_out, m_clean, radius=None):
    m_out = np.asarray(m_out, dtype=np.float64)
    m_clean = np.asarray(m_clean, dtype=np.float64)
    check_same_shape(m_out, m_clean, "motion vector sequences")
    den = max(fourier.hf_energy(m_clean, radius), fourier.EPS_MAG)
    return fourier.hf_energy(m_out, radius) / den


@dataclass(frozen=True)
class TransferConfig:
    steps: int = 500
    step_size: float = 0.05
    init: str = "static-first-frame"
    sma: SmaConfig = field(default_factory=SmaConfig)
    timestep_policy: object = None  # None or (t_low, t_high)
    schedule_T: int = 1000
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.init not in INITS:
            raise ValueError(f"unknown init {self.init!r}")
        if self.timestep_policy is not None:
            lo, hi = self.timestep_policy
            if not 1 <= lo <= hi <= self.schedule_T:
                raise ValueError(f"timestep range {lo},{hi} outside [1, {self.schedule_T}]")

    def to_dict(self):
        return {"steps": self.steps, "step_size": self.step_size, "init": self.init,
                "sma": self.sma.to_dict(),
                "timestep_policy": ("none" if self.timestep_policy is None
                                    else "uniform:%d,%d" % tuple(self.timestep_policy)),
                "schedule_T": self.schedule_T, "optimizer": self.optimizer,
                "seed": self.seed}


@dataclass
class TransferReport:
    loss_trace: list
    displacement_error: float
    hf_energy_ratio: float
    config: dict = None

    def to_dict(self):
        return {"config": self.config,
                "displacement_error": self.displacement_error,
                "hf_energy_ratio": self.hf_energy_ratio,
                "final_loss": self.loss_trace[-1].to_dict(),
                "loss_trace": [b.total for b in self.loss_trace]}

    def to_json(self):
        return dumps_json(self.to_dict())

    def trace_csv(self):
        rows = [(i, b.l_align, b.l_global, b.l_local_amp, b.l_local_phase, b.total)
                for i, b in enumerate(self.loss_trace)]
        return csv_text(("step", "l_align", "l_global", "l_local_amp",
                         "l_local_phase", "total"), rows)


def _init_target(source, cfg, target):
    if cfg.init == "copy-target":
        return np.array(source if target is None else target, dtype=np.float64)
    if cfg.init == "static-first-frame":
        return np.repeat(source[:1], source.shape[0], axis=0)
    return _rng(cfg.seed, 2).uniform(0.0, 1.0, size=source.shape)


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.k = 0

    def step(self, x, g):
        if self.m is None:
            self.m, self.v = np.zeros_like(g), np.zeros_like(g)
        self.k += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1 ** self.k)
        v_hat = self.v / (1 - self.beta2 ** self.k)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def motion_displacement_error(video, velocity):
    """Displacement error measured on the motion-vector sequence of ``video``.

    Consecutive residual frames of a translating scene are translates of each
    other, and any per-pixel static component cancels.  Returns ``None`` when
    the motion is degenerate (e.g. a static video).
    """
    mv = motion_vectors(video)
    if mv.shape[0] < 2:
        return None
    try:
        return displacement_error(mv, velocity)
    except DisplacementError:
        return None


def transfer(source, cfg=None, target=None, velocity=None, clean_motion=None):
    """Optimize target pixels so their motion matches ``source`` under SMA.

    Each step evaluates ``sma_grad`` on (source, target) motion vectors, pulls
    it back to pixels and applies the optimizer.  ``adam`` (default) uses
    ``step_size`` as its learning rate; ``sgd`` takes fixed steps along the
    gradient scaled by the motion-vector element count, so ``step_size`` is a
    per-element rate for the mean-normalized losses.

    With a timestep policy, each step draws ``t`` and fresh noise; the source
    motion vectors come from Tweedie estimates under an oracle denoiser (and
    are therefore exact), while the target passes through the zero denoiser,
    i.e. its estimate is ``v_t / sqrt(alpha_bar)`` and carries the scaled noise.

    ``velocity`` is the ground-truth motion for the displacement error
    (default: phase correlation on the source); ``clean_motion`` is the
    artifact-free reference for ``hf_energy_ratio`` (default: source motion).
    Returns ``(target, report)``.
    """
    cfg = cfg or TransferConfig()
    source = as_video(source, min_frames=3)
    x = _init_target(source, cfg, target)
    check_same_shape(source, x, "source and target")
    m_src = motion_vectors(source)
    schedule = make_schedule(cfg.schedule_T) if cfg.timestep_policy else None
    adam = _Adam(cfg.step_size) if cfg.optimizer == "adam" else None

    trace = []
    for step in range(cfg.steps):
        if cfg.timestep_policy is None:
            m_ref, m_pred = m_src, motion_vectors(x)
        else:
            lo, hi = cfg.timestep_policy
            t = int(_rng(cfg.seed, 3, step).integers(lo, hi + 1))
            eps_s = frame_noise(source.shape, cfg.seed, 4, step)
            eps_x = frame_noise(source.shape, cfg.seed, 5, step)
            vt_s = forward_sample(source, t, eps_s, schedule)
            vt_x = forward_sample(x, t, eps_x, schedule)
            m_ref = denoised_motion_vectors(vt_s, t, OracleDenoiser(source, schedule), schedule)
            # d(estimate)/dx is the identity, so the pixel gradient is unchanged
            m_pred = denoised_motion_vectors(vt_x, t, ZeroDenoiser(), schedule)
        loss = sma_loss(m_ref, m_pred, cfg.sma)
        if not np.isfinite(loss.total):
            raise NumericalError(f"non-finite loss at step {step}: {loss}")
        trace.append(loss)
        g = motion_vectors_adjoint(sma_grad(m_ref, m_pred, cfg.sma))
        if adam is not None:
            x = adam.step(x, g)
        else:
            x = x - cfg.step_size * m_src.size * g
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite target after step {step}")

    if velocity is None:
        try:
            velocity = np.mean(estimate_displacement(source), axis=0)
        except DisplacementError:
            pass
    if clean_motion is None:
        clean_motion = m_src
    report = TransferReport(
        loss_trace=trace,
        displacement_error=(None if velocity is None
                            else motion_displacement_error(x, velocity)),
        hf_energy_ratio=hf_energy_ratio(motion_vectors(x), clean_motion),
        config=cfg.to_dict(),
    )
    return x, report
