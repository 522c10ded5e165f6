"""Noise schedules, forward/reverse diffusion steps and Tweedie denoised estimates.

Timesteps are 1-based.  Schedule tables have length ``T + 1`` and index 0
holds the conventional values ``alpha_bar[0] = 1``, ``beta[0] = 0``, so
``beta_tilde[1]`` is well defined (it is 0).
"""

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, as_video, check_same_shape, motion_vectors


class InvalidEtaError(ValueError):
    """DDIM stochasticity too large for the requested step (negative radicand)."""


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray

    @property
    def T(self):
        return len(self.beta) - 1

    @classmethod
    def from_betas(cls, betas):
        """Build a schedule from ``beta[1..T]``."""
        b = np.asarray(betas, dtype=np.float64).ravel()
        if b.size < 1:
            raise ValueError("schedule needs at least one step")
        if np.any(b <= 0) or np.any(b >= 1):
            raise ValueError("betas must lie in (0, 1)")
        if np.any(np.diff(b) < 0):
            raise ValueError("betas must be non-decreasing")
        beta = np.concatenate([[0.0], b])
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        beta_tilde = np.zeros_like(beta)
        beta_tilde[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
        for arr in (beta, alpha, alpha_bar, beta_tilde):
            arr.setflags(write=False)
        return cls(beta, alpha, alpha_bar, beta_tilde)

    def check_t(self, t, lowest=1):
        if not (isinstance(t, (int, np.integer)) and lowest <= t <= self.T):
            raise ValueError(f"timestep {t!r} outside [{lowest}, {self.T}]")
        return int(t)


def make_schedule(T=1000, kind="linear", beta_start=1e-4, beta_end=2e-2):
    if T < 1:
        raise ValueError(f"schedule needs T >= 1, got {T}")
    if kind != "linear":
        raise ValueError(f"unknown schedule kind {kind!r}")
    if T == 1:
        return NoiseSchedule.from_betas([beta_start])
    return NoiseSchedule.from_betas(np.linspace(beta_start, beta_end, T))


def frame_noise(shape, seed, *key):
    """Standard normal noise of ``shape``, one independent stream per frame.

    Frame ``n`` is drawn from a Philox stream keyed by ``(seed, *key, n)`` so
    that any frame can be regenerated on its own.
    """
    frames = []
    for n in range(shape[0]):
        ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, key), n])
        rng = np.random.Generator(np.random.Philox(ss))
        frames.append(rng.standard_normal(shape[1:]))
    return np.stack(frames)


def forward_sample(v0, t, eps, s):
    """``sqrt(alpha_bar[t]) * v0 + sqrt(1 - alpha_bar[t]) * eps``."""
    t = s.check_t(t)
    v0 = np.asarray(v0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    check_same_shape(v0, eps, "signal and noise")
    ab = s.alpha_bar[t]
    return np.sqrt(ab) * v0 + np.sqrt(1.0 - ab) * eps


def residual_forward_sample(dv0, t, eps_n, eps_n1, s):
    """Noisy frame residuals from clean residuals and the two frames' noises.

    The conditional variance per coordinate is ``2 (1 - alpha_bar[t])``.
    """
    t = s.check_t(t)
    dv0 = np.asarray(dv0, dtype=np.float64)
    eps_n = np.asarray(eps_n, dtype=np.float64)
    eps_n1 = np.asarray(eps_n1, dtype=np.float64)
    check_same_shape(dv0, eps_n, "residuals and noise")
    check_same_shape(dv0, eps_n1, "residuals and noise")
    ab = s.alpha_bar[t]
    return np.sqrt(ab) * dv0 + np.sqrt(1.0 - ab) * (eps_n1 - eps_n)


def tweedie_estimate(vt, t, eps_pred, s):
    t = s.check_t(t)
    vt = np.asarray(vt, dtype=np.float64)
    eps_pred = np.asarray(eps_pred, dtype=np.float64)
    check_same_shape(vt, eps_pred, "latent and predicted noise")
    ab = s.alpha_bar[t]
    if ab <= 0:
        raise ValueError(f"alpha_bar[{t}] = {ab} is not positive")
    return (vt - np.sqrt(1.0 - ab) * eps_pred) / np.sqrt(ab)


def _predict(d, vt, t):
    eps = np.asarray(d(vt, t), dtype=np.float64)
    if eps.shape != vt.shape:
        raise ShapeError(f"denoiser returned shape {eps.shape}, expected {vt.shape}")
    if not np.all(np.isfinite(eps)):
        raise ValueError("denoiser returned non-finite values")
    return eps


def denoised_motion_vectors(vt, t, d, s):
    """Motion vectors of the Tweedie estimate of the clean video."""
    vt = as_video(vt, min_frames=2)
    return motion_vectors(tweedie_estimate(vt, t, _predict(d, vt, t), s))


def ancestral_step(xt, t, eps_pred, noise, s):
    t = s.check_t(t)
    xt = np.asarray(xt, dtype=np.float64)
    check_same_shape(xt, np.asarray(eps_pred), "latent and predicted noise")
    check_same_shape(xt, np.asarray(noise), "latent and noise")
    coef = (1.0 - s.alpha[t]) / np.sqrt(1.0 - s.alpha_bar[t])
    return (xt - coef * eps_pred) / np.sqrt(s.alpha[t]) + s.beta_tilde[t] * noise


def ddim_step(xt, t, t_prev, eps_pred, eta, noise, s):
    """One DDIM update from ``t`` to ``t_prev``.

    ``t_prev = 0`` is accepted as the terminal step (``alpha_bar[0] = 1``),
    where the update returns the Tweedie estimate when ``eta = 0``.
    """
    t = s.check_t(t)
    t_prev = s.check_t(t_prev, lowest=0)
    if t_prev >= t:
        raise ValueError(f"t_prev={t_prev} must be below t={t}")
    if not 0.0 <= eta <= 1.0:
        raise InvalidEtaError(f"eta={eta} outside [0, 1]")
    x0 = tweedie_estimate(xt, t, eps_pred, s)
    sigma = eta * s.beta_tilde[t]
    radicand = 1.0 - s.alpha_bar[t_prev] - sigma**2
    if radicand < 0:
        if radicand > -1e-15:
            radicand = 0.0
        else:
            raise InvalidEtaError(
                f"eta={eta} gives negative radicand {radicand} at t={t}, t_prev={t_prev}")
    check_same_shape(x0, np.asarray(noise), "latent and noise")
    return np.sqrt(s.alpha_bar[t_prev]) * x0 + np.sqrt(radicand) * eps_pred + sigma * noise


def ddim_sample(xT, d, s, steps=50, eta=0.0, seed=0):
    """Run DDIM from ``T`` down to the clean estimate on an evenly spaced grid."""
    x = np.asarray(xT, dtype=np.float64)
    grid = np.unique(np.linspace(s.T, 0, steps + 1).round().astype(int))[::-1]
    for t, t_prev in zip(grid[:-1], grid[1:]):
        eps = _predict(d, x, int(t))
        noise = frame_noise(x.shape, seed, t) if eta > 0 else np.zeros_like(x)
        x = ddim_step(x, int(t), int(t_prev), eps, eta, noise, s)
    return x


class OracleDenoiser:
    """Returns the exact noise that maps the known clean video to ``vt``."""

    def __init__(self, v0, schedule):
        self.v0 = np.asarray(v0, dtype=np.float64)
        self.schedule = schedule

    def __call__(self, vt, t):
        ab = self.schedule.alpha_bar[t]
        return (np.asarray(vt) - np.sqrt(ab) * self.v0) / np.sqrt(1.0 - ab)


class BiasedOracleDenoiser(OracleDenoiser):
    """Oracle output plus a constant offset on every element."""

    def __init__(self, v0, schedule, bias):
        super().__init__(v0, schedule)
        self.bias = float(bias)

    def __call__(self, vt, t):
        return super().__call__(vt, t) + self.bias


class ZeroDenoiser:
    def __call__(self, vt, t):
        return np.zeros_like(np.asarray(vt, dtype=np.float64))
