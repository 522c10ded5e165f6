"""Spectral motion alignment: wavelet/Fourier motion losses with analytic
gradients, diffusion denoising kernels and a latent-optimization motion
transfer simulator."""

from .diffusion import (BiasedOracleDenoiser, NoiseSchedule, OracleDenoiser, ZeroDenoiser,
                        ancestral_step, ddim_sample, ddim_step, denoised_motion_vectors,
                        forward_sample, make_schedule, residual_forward_sample,
                        tweedie_estimate)
from .fourier import (ComplexSpectrum, dft2, freq_weight, idft2, local_amp_loss,
                      local_loss_grad, local_phase_loss)
from .io import load_video, save_video
from .objective import (LossBreakdown, SmaConfig, align_loss, feature_sma_loss, sma_grad,
                        sma_loss)
from .tensor import motion_vectors, pixel_series
from .transfer import (SynthSpec, TransferConfig, TransferReport, estimate_displacement,
                       hf_energy_ratio, synth_video, transfer)
from .wavelet import (WaveletCoefficients, auto_levels, dwt1d, global_loss, global_loss_grad,
                      haar_filters, idwt1d)

__version__ = "0.1.0"
