"""Training objectives and the score/denoiser algebra.

Losses reduce by per-element mean unless ``reduction="sum"`` is given.
For complex inputs the squared norm is ``sum |v|**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, SingularityError
from .kernel import KernelParams, kernel_params
from .process import ProcessSpec

__all__ = [
    "LossWeights",
    "Precond",
    "ScorePrecond",
    "dsm_loss",
    "score_loss",
    "denoise_loss",
    "denoise_loss_grad",
    "precondition",
    "score_from_denoiser",
    "kernel_score",
    "sb_loss",
]

DenoiserFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class LossWeights:
    """Weighting ``lambda(t)`` plus the composite-loss weights.

    ``lambda_kind`` is ``"unit"``, ``"sigma2"`` (``lambda = sigma_t**2``) or
    ``"custom"`` with ``table = (times, values)`` interpolated linearly.
    ``perceptual(estimate, reference) -> float`` is an optional plugin; without
    it ``alpha_p`` must be zero.
    """

    lambda_kind: str = "unit"
    alpha: float = 0.0
    alpha_p: float = 0.0
    table: Optional[tuple] = None
    perceptual: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    reduction: str = "mean"

    def __post_init__(self):
        if self.lambda_kind not in ("unit", "sigma2", "custom"):
            raise ConfigurationError(f"unknown lambda_kind {self.lambda_kind!r}")
        if self.lambda_kind == "custom" and self.table is None:
            raise ConfigurationError("custom weighting needs a table")
        if self.alpha < 0 or self.alpha_p < 0:
            raise ConfigurationError("alpha and alpha_p must be >= 0")
        if self.reduction not in ("mean", "sum"):
            raise ConfigurationError(f"unknown reduction {self.reduction!r}")

    def weight(self, kernel: KernelParams) -> float:
        if self.lambda_kind == "unit":
            return 1.0
        if self.lambda_kind == "sigma2":
            return kernel.var
        times, values = self.table
        return float(np.interp(kernel.t, times, values))


def _sq(v, reduction: str) -> float:
    a = np.abs(np.asarray(v)) ** 2
    return float(a.mean() if reduction == "mean" else a.sum())


def _same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) > 1:
        raise DomainError(f"shape mismatch: {sorted(shapes)}")


def kernel_score(x_t, kernel: KernelParams, x0, y):
    """Score of the perturbation kernel, ``(mu_t - x_t) / var``."""
    if kernel.var <= 0:
        raise SingularityError(f"kernel variance is zero at t={kernel.t}")
    return (kernel.mean(x0, y) - np.asarray(x_t)) / kernel.var


def dsm_loss(score_out, x_t, kernel: KernelParams, x0, y, weights: Optional[LossWeights] = None) -> float:
    """Denoising score matching ``lambda(t) ||s - grad log p_0t||^2``."""
    weights = weights or LossWeights()
    _same_shape(score_out, x_t, x0, y)
    target = kernel_score(x_t, kernel, x0, y)
    return weights.weight(kernel) * _sq(np.asarray(score_out) - target, weights.reduction)


def score_loss(raw_net_out, z, sigma_t: float, reduction: str = "mean") -> float:
    """Noise-prediction loss ``||s sigma_t + z||^2`` with ``s = F / sigma_t``.

    The ``1/sigma_t`` output scaling cancels, leaving ``||F + z||^2``.
    """
    if not sigma_t > 0:
        raise DomainError(f"sigma_t must be positive, got {sigma_t}")
    _same_shape(raw_net_out, z)
    return _sq(np.asarray(raw_net_out) + np.asarray(z), reduction)


def denoise_loss(denoiser_out, kernel: KernelParams, x0, y, weights: Optional[LossWeights] = None) -> float:
    """``lambda(t) ||D - mu_t(x0, y)||^2``."""
    weights = weights or LossWeights()
    _same_shape(denoiser_out, x0, y)
    return weights.weight(kernel) * _sq(np.asarray(denoiser_out) - kernel.mean(x0, y), weights.reduction)


def denoise_loss_grad(denoiser_out, kernel: KernelParams, x0, y, weights: Optional[LossWeights] = None):
    """Gradient of ``denoise_loss`` w.r.t. the (real) denoiser output."""
    weights = weights or LossWeights()
    diff = np.asarray(denoiser_out) - kernel.mean(x0, y)
    scale = 2.0 * weights.weight(kernel)
    if weights.reduction == "mean":
        scale /= diff.size
    return scale * diff


class Precond:
    """Skip/output/input scalings around a raw network.

    ``c_skip = sd^2 / (v + sd^2)``, ``c_out = sqrt(v) sd / sqrt(v + sd^2)``,
    ``c_in = 1 / sqrt(v + sd^2)`` with ``v`` the kernel variance of ``spec``
    at ``t`` and ``sd`` the data scale.  The data are not zero-mean here (the
    kernel mean drifts toward ``y``), so the unit-variance target is only
    approximate.
    """

    def __init__(self, spec: ProcessSpec, sigma_data: float = 0.1):
        if not sigma_data > 0:
            raise DomainError(f"sigma_data must be positive, got {sigma_data}")
        self.spec = spec
        self.sigma_data = float(sigma_data)

    def variance(self, t: float) -> float:
        return kernel_params(self.spec, t).var

    def coefficients_from_var(self, var: float):
        sd2 = self.sigma_data**2
        total = var + sd2
        return sd2 / total, math.sqrt(var) * self.sigma_data / math.sqrt(total), 1.0 / math.sqrt(total)

    def coefficients(self, t: float):
        """``(c_skip, c_out, c_in)`` at time ``t``."""
        return self.coefficients_from_var(self.variance(t))


class ScorePrecond(Precond):
    """``c_skip = 1``, ``c_out = sigma_t``: the network output is ``sigma_t * s``."""

    def coefficients_from_var(self, var: float):
        _, _, c_in = super().coefficients_from_var(var)
        return 1.0, math.sqrt(var), c_in


def precondition(raw_net: DenoiserFn, pc: Precond, x_t, y, t: float):
    """``c_skip x_t + c_out F(c_in x_t, c_in y, t)``."""
    c_skip, c_out, c_in = pc.coefficients(t)
    x_t = np.asarray(x_t)
    y = np.asarray(y)
    return c_skip * x_t + c_out * np.asarray(raw_net(c_in * x_t, c_in * y, t))


def score_from_denoiser(denoiser_out, x_t, sigma2_t: float):
    """``(D - x_t) / sigma_t^2``."""
    if not sigma2_t > 0:
        raise SingularityError(f"sigma_t^2 must be positive, got {sigma2_t}")
    return (np.asarray(denoiser_out) - np.asarray(x_t)) / sigma2_t


def sb_loss(net_out, x0, weights: Optional[LossWeights] = None, istft_ctx=None) -> float:
    """Data-prediction loss with time-domain L1 and optional perceptual term.

    ``||F - x0||^2 + alpha ||istft(F) - istft(x0)||_1 - alpha_p P(istft(F), istft(x0))``.
    ``istft_ctx`` maps a spectrogram array to samples (e.g. ``IstftContext``).
    """
    weights = weights or LossWeights()
    if weights.alpha_p > 0 and weights.perceptual is None:
        raise ConfigurationError("alpha_p > 0 needs a perceptual plugin")
    _same_shape(net_out, x0)
    loss = _sq(np.asarray(net_out) - np.asarray(x0), weights.reduction)
    if weights.alpha == 0 and weights.alpha_p == 0:
        return loss
    if istft_ctx is None:
        raise ConfigurationError("time-domain terms need an istft context")
    est, ref = istft_ctx(net_out), istft_ctx(x0)
    if weights.alpha > 0:
        l1 = np.abs(est - ref)
        loss += weights.alpha * float(l1.mean() if weights.reduction == "mean" else l1.sum())
    if weights.alpha_p > 0:
        loss -= weights.alpha_p * float(weights.perceptual(est, ref))
    return loss
