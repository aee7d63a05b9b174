"""Diffusion-process mathematics for score-based and Schrödinger-bridge speech enhancement.

Closed-form perturbation kernels, the loss family, the bridge ODE sampler,
and Monte-Carlo and analytic oracles that check each formula.
"""
from .errors import (
    BridgelabError,
    ConfigurationError,
    DegenerateProcessError,
    DomainError,
    NumericError,
    SingularityError,
    TrainingDivergence,
)
from .kernel import KernelParams, kernel_params, ouve_kernel, sample_state, sb_marginal, sb_potentials
from .objective import (
    LossWeights,
    Precond,
    ScorePrecond,
    denoise_loss,
    dsm_loss,
    precondition,
    sb_loss,
    score_from_denoiser,
    score_loss,
)
from .oracle import AffineDenoiser, GaussianWorld, grad_check, mmse_denoiser, train_affine
from .process import DiffusionCoeff, ProcessSpec, TimeGrid, alpha_of, g_of, make_grid, sigma2_of
from .report import CheckRecord, Report
from .sampler import reverse_sde_sample, sb_ode_coeffs, sb_ode_sample
from .signal import StftConfig, Waveform, compress, decompress, istft, si_sdr, stft
from .simulate import SimConfig, euler_maruyama_forward, verify_forward_marginal

__version__ = "0.1.0"
