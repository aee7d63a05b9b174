"""Analytic Gaussian test world and a trainable affine denoiser.

The clean prior is ``x0 ~ N(m0, s0sq I)`` (real-valued, per dimension) with a
fixed conditioner ``y``.  Every quantity below then has a closed form:
the marginal of ``x_t``, its score, and the Bayes-optimal (MMSE) denoiser,
which is affine in ``x_t``.

``train_affine`` fits ``D(x_t) = a x_t + b_x y + b0`` by plain SGD (constant
step, minibatch 64, no momentum) with analytic gradients.  The affine family
is only Bayes-optimal at a single ``t``; with random ``t`` the fit is a
compromise, so convergence checks should fix ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError, SingularityError, TrainingDivergence
from .kernel import kernel_params
from .objective import LossWeights
from .process import ProcessSpec, alpha_of, sigma2_integral, sigma2_of

__all__ = [
    "GaussianWorld",
    "AffineDenoiser",
    "Batch",
    "TrainResult",
    "true_marginal",
    "true_score",
    "mmse_denoiser",
    "bayes_risk",
    "sample_batch",
    "loss_and_grad",
    "train_affine",
    "grad_check",
]

LOSS_KINDS = ("denoise", "score", "sb")
BATCH = 64
DIVERGENCE_LOSS = 1e6


@dataclass
class GaussianWorld:
    m0: np.ndarray
    s0sq: float
    y: np.ndarray

    def __post_init__(self):
        self.m0 = np.atleast_1d(np.asarray(self.m0, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.m0.shape != self.y.shape:
            raise DomainError(f"m0 and y shapes differ: {self.m0.shape} vs {self.y.shape}")
        if not self.s0sq > 0:
            raise DomainError(f"s0sq must be positive, got {self.s0sq}")

    @property
    def dim(self) -> int:
        return self.m0.size


@dataclass
class AffineDenoiser:
    """``D(x_t, y) = a x_t + b_x y + b0``."""

    a: float = 0.0
    b_x: float = 0.0
    b0: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        self.a = float(self.a)
        self.b_x = float(self.b_x)
        self.b0 = np.atleast_1d(np.asarray(self.b0, dtype=float))
        if not (math.isfinite(self.a) and math.isfinite(self.b_x) and np.all(np.isfinite(self.b0))):
            raise DomainError("affine parameters must be finite")

    def __call__(self, x_t, y, t=None):
        return self.a * np.asarray(x_t) + self.b_x * np.asarray(y) + self.b0

    def offset(self, y) -> np.ndarray:
        """``b_x y + b0``: the part identifiable when ``y`` is fixed."""
        return self.b_x * np.asarray(y) + self.b0

    @property
    def params(self) -> np.ndarray:
        return np.concatenate(([self.a, self.b_x], self.b0))

    @classmethod
    def from_params(cls, theta) -> "AffineDenoiser":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], theta[1], theta[2:].copy())

    def to_dict(self) -> dict:
        return {"a": self.a, "b_x": self.b_x, "b0": self.b0.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineDenoiser":
        return cls(d["a"], d["b_x"], d["b0"])


def true_marginal(world: GaussianWorld, spec: ProcessSpec, t: float):
    """Mean and variance of ``x_t`` with ``x0`` marginalised out."""
    kp = kernel_params(spec, t)
    mean = kp.w_x * world.m0 + kp.w_y * world.y
    return mean, kp.w_x**2 * world.s0sq + kp.var


def true_score(world: GaussianWorld, spec: ProcessSpec, t: float, x):
    mean, var = true_marginal(world, spec, t)
    if var <= 0:
        raise SingularityError(f"marginal variance vanishes at t={t}")
    return (mean - np.asarray(x)) / var


def _posterior_terms(world, spec, t):
    kp = kernel_params(spec, t)
    prior = kp.w_x**2 * world.s0sq
    total = prior + kp.var
    if total <= 0:
        raise DomainError(f"degenerate marginal variance at t={t}")
    return kp, prior, total


def mmse_denoiser(world: GaussianWorld, spec: ProcessSpec, t: float, target: str = "mu") -> AffineDenoiser:
    """Bayes-optimal affine denoiser by joint-Gaussian conditioning.

    ``target="mu"`` estimates ``mu_t = w_x x0 + w_y y`` (denoising/score
    losses); ``target="x0"`` estimates ``x0`` (data prediction).
    """
    kp, prior, total = _posterior_terms(world, spec, t)
    if target == "mu":
        a = prior / total
        return AffineDenoiser(a, (1.0 - a) * kp.w_y, (1.0 - a) * kp.w_x * world.m0)
    if target == "x0":
        a = kp.w_x * world.s0sq / total
        return AffineDenoiser(a, -a * kp.w_y, world.m0 * (1.0 - a * kp.w_x))
    raise DomainError(f"unknown target {target!r}")


def bayes_risk(world: GaussianWorld, spec: ProcessSpec, t: float, target: str = "mu") -> float:
    """Posterior variance per element (the minimum of the unit-weight L2 loss)."""
    kp, prior, total = _posterior_terms(world, spec, t)
    if target == "mu":
        return prior * kp.var / total
    return world.s0sq * kp.var / total


@dataclass
class Batch:
    t: np.ndarray
    x0: np.ndarray
    z: np.ndarray
    x_t: np.ndarray
    mu: np.ndarray
    var: np.ndarray
    y: np.ndarray


def _kernel_arrays(spec: ProcessSpec, ts: np.ndarray):
    if spec.kind == "ouve":
        w_x = np.asarray(alpha_of(spec, ts))
        return w_x, 1.0 - w_x, np.asarray(sigma2_of(spec, ts))
    if spec.kind == "sbve":
        st = np.asarray(sigma2_integral(spec, ts))
        s1 = float(sigma2_integral(spec, 1.0))
        sbar = np.maximum(s1 - st, 0.0)
        return sbar / s1, st / s1, sbar * st / s1
    kps = [kernel_params(spec, float(t)) for t in ts]
    return tuple(np.array([getattr(k, f) for k in kps]) for f in ("w_x", "w_y", "var"))


def sample_batch(
    world: GaussianWorld,
    spec: ProcessSpec,
    t: Optional[float],
    rng: np.random.Generator,
    size: int = BATCH,
    t_min: float = 0.03,
) -> Batch:
    """Draw ``(t, x0, z)`` and form ``x_t = mu_t + sigma_t z``.

    ``t=None`` samples ``t ~ U[t_min, 1]`` per item.
    """
    d = world.dim
    ts = rng.uniform(t_min, 1.0, size) if t is None else np.full(size, float(t))
    w_x, w_y, var = _kernel_arrays(spec, ts)
    x0 = world.m0 + math.sqrt(world.s0sq) * rng.standard_normal((size, d))
    z = rng.standard_normal((size, d))
    mu = w_x[:, None] * x0 + w_y[:, None] * world.y
    x_t = mu + np.sqrt(var)[:, None] * z
    return Batch(ts, x0, z, x_t, mu, var, np.broadcast_to(world.y, (size, d)))


def loss_and_grad(kind: str, theta, batch: Batch, weights: Optional[LossWeights] = None):
    """Minibatch loss and its gradient w.r.t. the affine network parameters.

    ``denoise``: ``lambda ||D - mu_t||^2``; ``sb``: ``||D - x0||^2``;
    ``score``: ``||F + z||^2`` where ``F = a x_t + b_x y + b0`` is the raw
    network (the implied denoiser is ``x_t + sigma_t F``).
    """
    weights = weights or LossWeights()
    theta = np.asarray(theta, dtype=float)
    a, b_x, b0 = theta[0], theta[1], theta[2:]
    out = a * batch.x_t + b_x * batch.y + b0
    n = out.size
    if kind == "denoise":
        if weights.lambda_kind == "unit":
            lam = np.ones_like(batch.var)
        elif weights.lambda_kind == "sigma2":
            lam = batch.var
        else:
            lam = np.interp(batch.t, *weights.table)
        resid = out - batch.mu
        lam = lam[:, None]
        loss = float(np.sum(lam * resid**2) / n)
        r = 2.0 * lam * resid / n
    elif kind == "score":
        resid = out + batch.z
        loss = float(np.sum(resid**2) / n)
        r = 2.0 * resid / n
    elif kind == "sb":
        resid = out - batch.x0
        loss = float(np.sum(resid**2) / n)
        r = 2.0 * resid / n
    else:
        raise DomainError(f"unknown loss kind {kind!r}")
    grad = np.concatenate(([np.sum(r * batch.x_t), np.sum(r * batch.y)], r.sum(axis=0)))
    return loss, grad


@dataclass
class TrainResult:
    denoiser: AffineDenoiser
    trace: np.ndarray
    network: np.ndarray


def _to_network(kind, d: AffineDenoiser, sigma: Optional[float]):
    if kind != "score":
        return d.params
    theta = d.params.copy()
    theta[0] -= 1.0
    return theta / sigma


def _to_denoiser(kind, theta, sigma: Optional[float]) -> AffineDenoiser:
    if kind != "score":
        return AffineDenoiser.from_params(theta)
    p = sigma * np.asarray(theta)
    p[0] += 1.0
    return AffineDenoiser.from_params(p)


def train_affine(
    world: GaussianWorld,
    spec: ProcessSpec,
    loss_kind: str = "denoise",
    steps: int = 20_000,
    lr: float = 1e-2,
    seed: int = 0,
    t: Optional[float] = 0.5,
    weights: Optional[LossWeights] = None,
    init: Optional[AffineDenoiser] = None,
    batch_size: int = BATCH,
    t_min: float = 0.03,
) -> TrainResult:
    """Fit the affine denoiser by SGD; returns denoiser-space coefficients.

    For ``score`` the trained object is the raw network ``F`` and the
    reported denoiser is ``x_t + sigma_t F``, which needs a fixed ``t``.
    """
    if loss_kind not in LOSS_KINDS:
        raise DomainError(f"unknown loss kind {loss_kind!r}")
    if steps < 0 or lr < 0:
        raise DomainError("steps and lr must be non-negative")
    if loss_kind == "score" and t is None:
        raise ConfigurationError("score-loss training maps to a denoiser only at a fixed t")
    sigma = math.sqrt(kernel_params(spec, t).var) if loss_kind == "score" else None
    if sigma == 0:
        raise SingularityError("score loss undefined where the kernel variance vanishes")
    init = init or AffineDenoiser(0.0, 0.0, np.zeros(world.dim))
    if init.b0.size == 1 and world.dim > 1:
        init = AffineDenoiser(init.a, init.b_x, np.full(world.dim, init.b0[0]))
    theta = _to_network(loss_kind, init, sigma)
    rng = np.random.default_rng(seed)
    trace = np.empty(steps)
    for step in range(steps):
        batch = sample_batch(world, spec, t, rng, batch_size, t_min)
        loss, grad = loss_and_grad(loss_kind, theta, batch, weights)
        if not (loss <= DIVERGENCE_LOSS):
            raise TrainingDivergence(f"loss {loss:.3g} at step {step} (lr={lr})")
        trace[step] = loss
        theta = theta - lr * grad
    return TrainResult(_to_denoiser(loss_kind, theta, sigma), trace, theta)


def grad_check(
    loss_kind: str,
    theta,
    batch: Batch,
    h: float = 1e-5,
    weights: Optional[LossWeights] = None,
    grad_scale: float = 1.0,
) -> float:
    """Max relative error between the analytic gradient and central differences.

    ``grad_scale`` corrupts the analytic gradient for detector checks.
    """
    if not (1e-7 <= h <= 1e-3):
        raise DomainError(f"h must lie in [1e-7, 1e-3], got {h}")
    theta = np.asarray(theta, dtype=float)
    _, grad = loss_and_grad(loss_kind, theta, batch, weights)
    grad = grad * grad_scale
    fd = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        fd[i] = (loss_and_grad(loss_kind, theta + e, batch, weights)[0]
                 - loss_and_grad(loss_kind, theta - e, batch, weights)[0]) / (2 * h)
    scale = np.maximum(np.maximum(np.abs(fd), np.abs(grad)), 1e-12)
    return float(np.max(np.abs(grad - fd) / scale))
