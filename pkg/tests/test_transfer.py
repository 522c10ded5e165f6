import itertools

import numpy as np
import pytest

from sma.fourier import dft2
from sma.objective import SmaConfig
from sma.tensor import motion_vectors
from sma.transfer import (DisplacementError, NumericalError, SynthSpec, TransferConfig,
                          displacement_error, estimate_displacement, hf_energy_ratio,
                          motion_displacement_error, synth_video, transfer)


def brute_force_shift(f1, f2):
    """Exhaustive circular-shift search minimizing the squared difference."""
    H, W = f1.shape
    best = None
    for dy, dx in itertools.product(range(H), range(W)):
        err = np.sum((np.roll(f1, (dy, dx), axis=(0, 1)) - f2) ** 2)
        if best is None or err < best[0] - 1e-12:
            best = (err, dx if dx <= W // 2 else dx - W, dy if dy <= H // 2 else dy - H)
    return best[1], best[2]


@pytest.mark.parametrize("pattern", ["translate-square", "translate-impulse"])
@pytest.mark.parametrize("background", ["flat", "texture"])
def test_synth_is_a_circular_translation(pattern, background):
    spec = SynthSpec(pattern=pattern, background=background, velocity=(2, -1), size=16)
    v, vel = synth_video(spec)
    assert v.shape == (8, 1, 16, 16) and vel == (2.0, -1.0)
    for n in range(7):
        np.testing.assert_array_equal(np.roll(v[n, 0], (-1, 2), axis=(0, 1)), v[n + 1, 0])


def test_synth_deterministic_and_seeded():
    a = synth_video(SynthSpec(background="texture", artifact="flicker", seed=3))[0]
    b = synth_video(SynthSpec(background="texture", artifact="flicker", seed=3))[0]
    c = synth_video(SynthSpec(background="texture", artifact="flicker", seed=4))[0]
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_flat_square_motion_lives_on_edges():
    v, _ = synth_video(SynthSpec())
    mv = motion_vectors(v)[:, 0]
    # a square of side 8 moving 2 px/frame changes 2 columns on each side
    assert np.all(np.count_nonzero(mv, axis=(1, 2)) == 2 * 2 * 8)
    assert set(np.unique(mv)) == {-1.0, 0.0, 1.0}


def test_fence_adds_nyquist_energy():
    clean = motion_vectors(synth_video(SynthSpec())[0])
    fence = motion_vectors(synth_video(SynthSpec(artifact="fence"))[0])
    W = clean.shape[-1]
    amp_c = dft2(clean).amplitude[..., :, 0]  # centered column 0 = horizontal Nyquist
    amp_f = dft2(fence).amplitude[..., :, 0]
    assert amp_c.max() < 1e-9
    assert amp_f.max() > 0.3 * W


def test_rotate_bar_changes():
    v, _ = synth_video(SynthSpec(pattern="rotate-bar", velocity=(15, 0), object_size=20))
    assert np.all(np.abs(motion_vectors(v)).sum(axis=(1, 2, 3)) > 0)


@pytest.mark.parametrize("kw", [{"pattern": "spiral"}, {"frames": 1},
                                {"velocity": (0.5, 0)}, {"object_size": 99}])
def test_synth_validation(kw):
    with pytest.raises(ValueError):
        SynthSpec(**kw)


@pytest.mark.parametrize("velocity", [(2, 0), (0, -1), (-3, 2), (1, 1)])
def test_displacement_matches_exhaustive_search(velocity):
    v, vel = synth_video(SynthSpec(size=16, background="texture", velocity=velocity, frames=4))
    est = estimate_displacement(v)
    for n, e in enumerate(est):
        assert e == brute_force_shift(v[n, 0], v[n + 1, 0]) == tuple(vel)
    assert displacement_error(v, vel) == 0.0


def test_displacement_random_frames(rng):
    for _ in range(5):
        f = rng.standard_normal((12, 12))
        dy, dx = rng.integers(-5, 7, size=2)
        v = np.stack([f, np.roll(f, (dy, dx), axis=(0, 1))])[:, None]
        assert estimate_displacement(v)[0] == brute_force_shift(f, v[1, 0])


def test_static_texture_has_zero_displacement():
    v, _ = synth_video(SynthSpec(background="texture", velocity=(0, 0), object_size=1,
                                 pattern="translate-impulse"))
    assert estimate_displacement(v) == [(0, 0)] * 7


def test_structureless_frames_raise():
    with pytest.raises(DisplacementError):
        estimate_displacement(np.ones((3, 1, 8, 8)))
    v = np.zeros((3, 1, 8, 8))
    assert motion_displacement_error(v, (1, 0)) is None


def test_motion_displacement_ignores_static_ghost():
    v, vel = synth_video(SynthSpec())
    ghost = v + 0.5 * v[0]
    assert motion_displacement_error(ghost, vel) == 0.0


def test_hf_energy_ratio_cases(rng):
    m = motion_vectors(rng.standard_normal((5, 1, 16, 16)))
    assert hf_energy_ratio(m, m) == pytest.approx(1.0, rel=1e-14)
    assert hf_energy_ratio(np.zeros_like(m), m) == 0.0
    stripes = m + 0.5 * (np.arange(16) % 2)[None, None, None, :]
    assert hf_energy_ratio(stripes, m) > 1.0


def test_copy_target_is_a_fixed_point():
    v, vel = synth_video(SynthSpec(size=16))
    x, rep = transfer(v, TransferConfig(steps=3, init="copy-target"), velocity=vel)
    assert rep.loss_trace[0].total == 0.0
    np.testing.assert_array_equal(x, v)
    assert rep.displacement_error == 0.0
    assert rep.hf_energy_ratio == 1.0


def test_transfer_deterministic():
    v, vel = synth_video(SynthSpec(size=16))
    cfg = TransferConfig(steps=20, init="random", seed=9)
    a = transfer(v, cfg, velocity=vel)[1].to_json()
    b = transfer(v, cfg, velocity=vel)[1].to_json()
    assert a == b


def test_clean_transfer_descends_and_recovers_motion():
    v, vel = synth_video(SynthSpec())
    x, rep = transfer(v, TransferConfig(), velocity=vel)
    t = np.array([b.total for b in rep.loss_trace])
    med50 = [np.median(t[i:i + 50]) for i in range(0, 250, 50)]
    assert all(b < a for a, b in zip(med50, med50[1:]))
    med100 = [np.median(t[i:i + 100]) for i in range(0, 500, 100)]
    assert all(b < a for a, b in zip(med100, med100[1:]))
    assert t[-1] < 0.5 * t[0]
    assert rep.displacement_error <= 0.5


def test_sgd_option_runs():
    v, vel = synth_video(SynthSpec(size=16))
    cfg = TransferConfig(steps=5, optimizer="sgd", step_size=1e-3,
                         sma=SmaConfig(lambda_g=0, lambda_l=0))
    rep = transfer(v, cfg, velocity=vel)[1]
    t = [b.total for b in rep.loss_trace]
    assert all(b < a for a, b in zip(t, t[1:]))


def test_timestep_policy_path():
    v, vel = synth_video(SynthSpec(size=16))
    cfg = TransferConfig(steps=10, timestep_policy=(1, 50), seed=2)
    x, rep = transfer(v, cfg, velocity=vel)
    assert len(rep.loss_trace) == 10 and np.all(np.isfinite(x))
    assert rep.config["timestep_policy"] == "uniform:1,50"
    again = transfer(v, cfg, velocity=vel)[1]
    assert again.to_json() == rep.to_json()


def test_divergence_raises():
    v, vel = synth_video(SynthSpec(size=16))
    cfg = TransferConfig(steps=50, optimizer="sgd", step_size=1e300)
    with pytest.raises(NumericalError):
        with np.errstate(all="ignore"):
            transfer(v, cfg, velocity=vel)


def test_transfer_needs_three_frames():
    with pytest.raises(ValueError):
        transfer(np.zeros((2, 1, 8, 8)))


def test_trace_csv_header():
    v, vel = synth_video(SynthSpec(size=16))
    rep = transfer(v, TransferConfig(steps=2), velocity=vel)[1]
    lines = rep.trace_csv().splitlines()
    assert lines[0] == "step,l_align,l_global,l_local_amp,l_local_phase,total"
    assert len(lines) == 3


@pytest.mark.parametrize("kw", [{"optimizer": "lbfgs"}, {"steps": 0}, {"step_size": 0},
                                {"init": "noise"}, {"timestep_policy": (0, 10)}])
def test_transfer_config_validation(kw):
    with pytest.raises(ValueError):
        TransferConfig(**kw)
