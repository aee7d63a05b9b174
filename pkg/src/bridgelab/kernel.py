"""Closed-form perturbation kernels, bridge marginals and bridge potentials.

Every kernel here is "mean interpolation plus isotropic Gaussian":
``x_t ~ N_C(w_x * x0 + w_y * y, var * I)``.

Complex Gaussian convention: ``N_C(mu, s2)`` has independent real and
imaginary parts, each with variance ``s2 / 2``, so ``E|x - mu|**2 = s2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateProcessError, DomainError
from .process import ProcessSpec, alpha_of, sigma2_integral, sigma2_of

__all__ = [
    "KernelParams",
    "GaussianFactor",
    "GaussianPotentials",
    "ouve_kernel",
    "sb_marginal",
    "kernel_params",
    "sb_potentials",
    "complex_normal",
    "sample_state",
    "log_normal",
]


@dataclass(frozen=True)
class KernelParams:
    """Interpolation weights and marginal variance at time ``t``."""

    t: float
    w_x: float
    w_y: float
    var: float

    def __post_init__(self):
        if not self.var >= 0:
            raise DomainError(f"kernel variance must be >= 0, got {self.var}")

    @property
    def std(self) -> float:
        return math.sqrt(self.var)

    def mean(self, x0, y):
        """``mu_t(x0, y) = w_x x0 + w_y y``."""
        return self.w_x * np.asarray(x0) + self.w_y * np.asarray(y)


class GaussianFactor(NamedTuple):
    mean_weight: float
    var: float


class GaussianPotentials(NamedTuple):
    """Bridge potentials: ``psi_bar`` is centred on ``x0``, ``psi`` on ``y``.

    At ``t = 0`` (``psi_bar``) and ``t = 1`` (``psi``) the variance is zero
    and the potential is a point mass; log-densities are undefined there.
    """

    psi_bar: GaussianFactor
    psi: GaussianFactor


def ouve_kernel(spec: ProcessSpec, t: float) -> KernelParams:
    """OUVE perturbation kernel ``p_0t(x_t | x0, y)``."""
    if spec.kind != "ouve":
        raise DomainError(f"ouve_kernel needs an OUVE process, got {spec.kind!r}")
    decay = float(alpha_of(spec, t))
    return KernelParams(float(t), decay, 1.0 - decay, float(sigma2_of(spec, t)))


def _bridge_terms(spec: ProcessSpec, t: float):
    if spec.kind == "ouve":
        raise DomainError("the bridge is defined for sbve/linear processes only")
    s1 = float(sigma2_integral(spec, 1.0))
    if s1 <= 0:
        raise DegenerateProcessError("sigma_1^2 = 0: bridge undefined (c = 0?)")
    st = float(sigma2_integral(spec, t))
    alpha_t = float(alpha_of(spec, t))
    alpha_1 = float(alpha_of(spec, 1.0))
    # clamp tiny negative round-off near t = 1
    sbar = max(s1 - st, 0.0)
    return alpha_t, alpha_t / alpha_1, st, sbar, s1


def sb_marginal(spec: ProcessSpec, t: float) -> KernelParams:
    """Bridge marginal ``p_t(x_t | x0, y)`` in the limit of point-mass endpoints."""
    alpha_t, alpha_bar, st, sbar, s1 = _bridge_terms(spec, t)
    return KernelParams(
        float(t),
        alpha_t * sbar / s1,
        alpha_bar * st / s1,
        alpha_t**2 * sbar * st / s1,
    )


def kernel_params(spec: ProcessSpec, t: float) -> KernelParams:
    """OUVE kernel for ``ouve``, bridge marginal otherwise."""
    return ouve_kernel(spec, t) if spec.kind == "ouve" else sb_marginal(spec, t)


def sb_potentials(spec: ProcessSpec, t: float) -> GaussianPotentials:
    alpha_t, alpha_bar, st, sbar, _ = _bridge_terms(spec, t)
    return GaussianPotentials(
        psi_bar=GaussianFactor(alpha_t, alpha_t**2 * st),
        psi=GaussianFactor(alpha_bar, alpha_t**2 * sbar),
    )


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex normal samples with ``E|z|**2 = var``."""
    scale = math.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_state(params: KernelParams, x0, y, noise_source: np.random.Generator) -> np.ndarray:
    """Draw ``x_t = w_x x0 + w_y y + sqrt(var) z`` with complex standard ``z``."""
    x0 = np.asarray(x0, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x0.shape != y.shape:
        raise DomainError(f"x0 and y shapes differ: {x0.shape} vs {y.shape}")
    mean = params.w_x * x0 + params.w_y * y
    if params.var == 0:
        return mean
    return mean + params.std * complex_normal(noise_source, x0.shape)


def log_normal(x, mean, var):
    """Real scalar Gaussian log-density (used by the residual checks)."""
    x = np.asarray(x, dtype=float)
    return -0.5 * (x - mean) ** 2 / var - 0.5 * np.log(2.0 * np.pi * var)
