"""Monte-Carlo and finite-difference verification of the closed forms.

The Euler-Maruyama engine splits paths into fixed-size blocks; block ``b``
draws its noise from a Philox stream keyed by ``(seed, b)``.  Results are
therefore bit-identical for any worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericError, SingularityError
from .kernel import kernel_params, log_normal, sb_marginal, sb_potentials
from .process import ProcessSpec, alpha_of, f_of, g_of, sigma2_integral
from .report import CheckRecord, Report

__all__ = [
    "SimConfig",
    "McStats",
    "worker_count",
    "block_rng",
    "euler_maruyama_forward",
    "sb_forward_drift",
    "verify_forward_marginal",
    "time_nodes",
    "PdeResidual",
    "pde_residual",
    "pde_convergence",
    "nelson_residual",
    "ito_isometry_check",
]

BLOCK_SIZE = 1024
SB_STOP_DELTA = 1e-3
Z_THRESHOLD = 4.0


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    n_paths: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"dt must be positive, got {self.dt}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise DomainError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not (0 <= self.seed < 2**64):
            raise DomainError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class McStats:
    """Empirical moments at time ``t`` (per dimension).

    ``stderr_mean`` is the standard error of each real component of the
    mean; ``var`` is the total complex variance ``E|x - mean|**2``.
    """

    t: float
    mean: np.ndarray
    var: np.ndarray
    stderr_mean: np.ndarray
    stderr_var: np.ndarray
    n_paths: int


def worker_count() -> int:
    env = os.environ.get("BRIDGELAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for path block ``block``."""
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(block)))


def _blocks(n_paths: int):
    starts = range(0, n_paths, BLOCK_SIZE)
    return [(b, s, min(BLOCK_SIZE, n_paths - s)) for b, s in enumerate(starts)]


def _run_blocks(fn, n_paths: int):
    blocks = _blocks(n_paths)
    workers = min(worker_count(), len(blocks))
    if workers <= 1:
        parts = [fn(*blk) for blk in blocks]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda blk: fn(*blk), blocks))
    return np.concatenate(parts, axis=0)


def _step_count(t_end: float, dt: float) -> int:
    return max(1, int(math.ceil(t_end / dt - 1e-9)))


def time_nodes(t_end: float, dt: float, stiff_fraction: Optional[float] = None) -> np.ndarray:
    """Integration nodes ``0 = s_0 < ... < s_n = t_end``.

    Uniform with step ``t_end / ceil(t_end / dt)``.  With ``stiff_fraction``
    the step is additionally capped at ``stiff_fraction * (1 - s)`` so that
    drifts scaling like ``1 / (1 - s)`` stay resolved.
    """
    n = _step_count(t_end, dt)
    nodes = t_end * np.arange(n + 1) / n
    if stiff_fraction is None:
        return nodes
    h = t_end / n
    # switch to geometric steps once the uniform step exceeds the cap
    t_switch = max(0.0, 1.0 - h / stiff_fraction)
    if t_switch >= t_end:
        return nodes
    head = nodes[nodes < t_switch]
    m = max(1, int(math.ceil(math.log((1.0 - t_switch) / (1.0 - t_end)) / -math.log1p(-stiff_fraction))))
    tail = 1.0 - (1.0 - t_switch) * ((1.0 - t_end) / (1.0 - t_switch)) ** (np.arange(m + 1) / m)
    tail[-1] = t_end
    return np.concatenate((head, tail))


def _moments(t: float, samples: np.ndarray) -> McStats:
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    dev2 = np.abs(samples - mean) ** 2
    if n < 2:
        nan = np.full(mean.shape, np.nan)
        return McStats(t, mean, nan, nan, nan, n)
    var = dev2.sum(axis=0) / (n - 1)
    stderr_mean = np.sqrt(var / (2.0 * n))
    stderr_var = dev2.std(axis=0, ddof=1) / math.sqrt(n)
    return McStats(t, mean, var, stderr_mean, stderr_var, n)


def sb_forward_drift(spec: ProcessSpec, t: float, x, y):
    """Forward bridge drift ``f(t) x + g(t)**2 grad log Psi_t(x)``."""
    if spec.kind == "ouve":
        raise DomainError("sb_forward_drift needs an sbve/linear process")
    if t >= 1.0 - 1e-9:
        raise SingularityError(f"bridge drift is singular at t={t} (sigma_bar -> 0)")
    pot = sb_potentials(spec, t)
    x = np.asarray(x)
    score = (pot.psi.mean_weight * np.asarray(y) - x) / pot.psi.var
    return g_of(spec, t) ** 2 * score + f_of(spec, t) * x


def _default_drift(spec: ProcessSpec, y):
    if spec.kind == "ouve":
        return lambda t, x: spec.gamma * (y - x)
    if spec.kind == "sbve":
        return lambda t, x: sb_forward_drift(spec, t, x, y)
    return lambda t, x: f_of(spec, t) * x


def euler_maruyama_forward(
    spec: ProcessSpec,
    x0,
    y,
    cfg: SimConfig,
    t_end: float,
    drift: Optional[Callable] = None,
    return_paths: bool = False,
    stiff_fraction: float = 2e-3,
):
    """Simulate ``n_paths`` trajectories of the forward SDE up to ``t_end``.

    The drift defaults to ``gamma (y - x)`` (OUVE), the bridge drift (SBVE) or
    ``f(t) x`` (linear).  Increments are circular complex normals with
    ``E|dw|**2 = dt``.  The step is ``t_end / ceil(t_end / dt)``; for the
    bridge drift it is further capped near ``t = 1`` (see ``time_nodes``).
    """
    if not (0.0 < t_end <= 1.0):
        raise DomainError(f"t_end must lie in (0, 1], got {t_end}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    if x0.shape != y.shape:
        raise DomainError(f"x0 and y shapes differ: {x0.shape} vs {y.shape}")
    bridge = drift is None and spec.kind == "sbve"
    drift = drift or _default_drift(spec, y)
    nodes = time_nodes(t_end, cfg.dt, stiff_fraction if bridge else None)
    ts, hs = nodes[:-1], np.diff(nodes)
    n = ts.size
    gs = np.asarray(g_of(spec, ts)) * np.sqrt(hs / 2.0)
    d = x0.shape[0]

    def simulate_block(block, start, size):
        rng = block_rng(cfg.seed, block)
        x = np.broadcast_to(x0, (size, d)).copy()
        for j in range(n):
            noise = rng.standard_normal((size, d)) + 1j * rng.standard_normal((size, d))
            x = x + drift(ts[j], x) * hs[j] + gs[j] * noise
            if not np.all(np.isfinite(x)):
                bad = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0])
                raise NumericError(f"non-finite state on path {start + bad} at step {j} (t={ts[j]:.6g})")
        return x

    samples = _run_blocks(simulate_block, cfg.n_paths)
    stats = _moments(t_end, samples)
    return (stats, samples) if return_paths else stats


def verify_forward_marginal(
    spec: ProcessSpec,
    x0,
    y,
    cfg: SimConfig,
    t_end: float,
    delta: float = SB_STOP_DELTA,
    threshold: float = Z_THRESHOLD,
    var_scale: float = 1.0,
) -> Report:
    """Compare simulated moments with the closed-form kernel/marginal.

    Bridge processes are stopped at ``min(t_end, 1 - delta)``.  ``var_scale``
    multiplies the expected variance (deliberate corruption for detector
    tests).
    """
    if spec.kind != "ouve":
        t_end = min(t_end, 1.0 - delta)
    stats = euler_maruyama_forward(spec, x0, y, cfg, t_end)
    kp = kernel_params(spec, t_end)
    x0 = np.atleast_1d(np.asarray(x0, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    mu = kp.w_x * x0 + kp.w_y * y
    label = f"{spec.kind}@t={t_end:g}"
    records = []
    for i in range(mu.shape[0]):
        se = stats.stderr_mean[i]
        records.append(CheckRecord.statistical(f"{label} mean.re[{i}]", mu[i].real, stats.mean[i].real, se, threshold))
        records.append(CheckRecord.statistical(f"{label} mean.im[{i}]", mu[i].imag, stats.mean[i].imag, se, threshold))
        records.append(CheckRecord.statistical(f"{label} var[{i}]", kp.var * var_scale, stats.var[i], stats.stderr_var[i], threshold))
    return Report(f"forward_marginal:{label}", records)


class PdeResidual(NamedTuple):
    r_psi: float
    r_psi_bar: float


def _require_zero_drift(spec: ProcessSpec):
    if spec.kind == "sbve":
        return
    if spec.kind == "linear" and spec.f_table is not None and not np.any(spec.f_table[1]):
        return
    raise DomainError("PDE residuals are implemented for f = 0 only")


def pde_residual(
    spec: ProcessSpec,
    t: float,
    x: float,
    x0: float,
    y: float,
    h_t: float = 1e-4,
    h_x: float = 1e-4,
    relative: bool = True,
) -> PdeResidual:
    """Central-difference residuals of the coupled potential PDEs (scalar, f = 0).

    ``dPsi/dt + g^2/2 Psi_xx`` and ``dPsibar/dt - g^2/2 Psibar_xx``.  With
    ``relative`` each residual is divided by the larger of its two terms.
    """
    _require_zero_drift(spec)
    if not (0.0 < t - h_t and t + h_t < 1.0):
        raise DomainError(f"t={t} with h_t={h_t} touches a degenerate endpoint")

    def densities(s, xv):
        pot = sb_potentials(spec, s)
        if pot.psi.var <= 0 or pot.psi_bar.var <= 0:
            raise DomainError(f"degenerate potential at t={s}")
        psi = np.exp(log_normal(xv, pot.psi.mean_weight * y, pot.psi.var))
        psi_bar = np.exp(log_normal(xv, pot.psi_bar.mean_weight * x0, pot.psi_bar.var))
        return psi, psi_bar

    p_hi, pb_hi = densities(t + h_t, x)
    p_lo, pb_lo = densities(t - h_t, x)
    dpsi_dt, dpsib_dt = (p_hi - p_lo) / (2 * h_t), (pb_hi - pb_lo) / (2 * h_t)
    p0, pb0 = densities(t, x)
    pp, pbp = densities(t, x + h_x)
    pm, pbm = densities(t, x - h_x)
    half_g2 = 0.5 * g_of(spec, t) ** 2
    diff_psi = half_g2 * (pp - 2 * p0 + pm) / h_x**2
    diff_psib = half_g2 * (pbp - 2 * pb0 + pbm) / h_x**2
    r_psi = dpsi_dt + diff_psi
    r_psib = dpsib_dt - diff_psib
    if relative:
        r_psi /= max(abs(dpsi_dt), abs(diff_psi))
        r_psib /= max(abs(dpsib_dt), abs(diff_psib))
    return PdeResidual(float(r_psi), float(r_psib))


def pde_convergence(spec, t, x, x0, y, hs: Sequence[float] = (4e-3, 2e-3, 1e-3)) -> np.ndarray:
    """Ratios of successive residual magnitudes under step halving.

    Returns an array of shape ``(len(hs) - 1, 2)``; second order gives ~4.
    """
    res = np.array([np.abs(pde_residual(spec, t, x, x0, y, h, h, relative=False)) for h in hs])
    return res[:-1] / res[1:]


def nelson_residual(
    spec: ProcessSpec,
    t: float,
    x_samples,
    x0: float,
    y: float,
    var_scale: float = 1.0,
) -> float:
    """Max ``|d/dx (log Psi + log Psibar - log p_t)|`` over the samples.

    Gradients are analytic.  ``var_scale`` perturbs the marginal variance for
    sensitivity checks.
    """
    if not (0.0 < t < 1.0):
        raise DomainError(f"t must lie in (0, 1), got {t}")
    pot = sb_potentials(spec, t)
    marg = sb_marginal(spec, t)
    if min(pot.psi.var, pot.psi_bar.var, marg.var) <= 0:
        raise DomainError(f"degenerate potentials at t={t}")
    x = np.asarray(x_samples, dtype=float)
    grad_psi = (pot.psi.mean_weight * y - x) / pot.psi.var
    grad_psib = (pot.psi_bar.mean_weight * x0 - x) / pot.psi_bar.var
    grad_p = (marg.mean(x0, y) - x) / (marg.var * var_scale)
    return float(np.max(np.abs(grad_psi + grad_psib - grad_p)))


def ito_isometry_check(
    spec: ProcessSpec,
    t_end: float,
    cfg: SimConfig,
    threshold: float = Z_THRESHOLD,
) -> Report:
    """MC estimate of ``E[beta(t)**2]`` against quadrature of ``(g/alpha)**2``.

    ``beta(t) = int_0^t g(s) / alpha(s) dW(s)`` is simulated directly with
    real Brownian increments.
    """
    if not (0.0 < t_end <= 1.0):
        raise DomainError(f"t_end must lie in (0, 1], got {t_end}")
    n = _step_count(t_end, cfg.dt)
    h = t_end / n
    ts = t_end * np.arange(n) / n
    weights = np.asarray(g_of(spec, ts)) / np.asarray(alpha_of(spec, ts)) * math.sqrt(h)

    def simulate_block(block, start, size):
        rng = block_rng(cfg.seed, block)
        beta = np.zeros(size)
        for j in range(n):
            beta += weights[j] * rng.standard_normal(size)
        return beta

    beta = _run_blocks(simulate_block, cfg.n_paths)
    sq = beta**2
    observed = float(sq.mean())
    expected = float(sigma2_integral(spec, t_end, quadrature=True))
    stderr = float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else math.nan
    label = f"ito_isometry {spec.kind}@t={t_end:g}"
    if expected == 0.0 and observed == 0.0:
        rec = CheckRecord(label, 0.0, 0.0, 0.0, 0.0, threshold, True, "g == 0")
    else:
        rec = CheckRecord.statistical(label, expected, observed, stderr, threshold)
    return Report("ito", [rec])
