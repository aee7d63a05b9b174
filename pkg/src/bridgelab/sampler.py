"""Inference-time solvers: the bridge ODE sampler and a reverse-SDE sampler.

Bridge ODE step (from ``t_cur`` down to ``t_prev``)::

    x_prev = a * x_cur + b * D(x_cur, y, t_cur) + c * y

    a = alpha_p sigma_p sigmabar_p / (alpha_c sigma_c sigmabar_c)
    b = alpha_p / sigma_1^2 * (sigmabar_p^2 - sigmabar_c sigma_p sigmabar_p / sigma_c)
    c = alpha_p / (alpha_1 sigma_1^2) * (sigma_p^2 - sigma_c sigma_p sigmabar_p / sigmabar_c)

At ``t_cur = 1`` (``sigmabar_c = 0``) ``a`` and ``c`` diverge individually,
but ``x_cur = y`` there, so only ``a + c`` matters; its limit is
``w_y(t_prev)`` while ``b -> w_x(t_prev)``.  That first step is applied in
folded form (``a = 0``, ``c = w_y(t_prev)``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .errors import DomainError, NumericError
from .process import ProcessSpec, TimeGrid, alpha_of, g_of, sigma2_integral, sigma2_of
from .simulate import SimConfig

__all__ = [
    "SbOdeCoeffs",
    "SampleRun",
    "sb_ode_coeffs",
    "sb_ode_coeffs_raw",
    "sb_ode_sample",
    "reverse_sde_sample",
    "dump_trajectory_csv",
]


@dataclass(frozen=True)
class SbOdeCoeffs:
    n: int
    a: float
    b: float
    c: float
    folded: bool = False


@dataclass
class SampleRun:
    grid: TimeGrid
    final: np.ndarray
    trajectory: Optional[List[np.ndarray]] = None
    times: np.ndarray = field(default=None)


def _bridge_state(spec: ProcessSpec, t: float):
    s1 = float(sigma2_integral(spec, 1.0))
    st = float(sigma2_integral(spec, t))
    return float(alpha_of(spec, t)), math.sqrt(st), math.sqrt(max(s1 - st, 0.0)), s1


def sb_ode_coeffs_raw(spec: ProcessSpec, t_prev: float, t_cur: float):
    """Unfolded ``(a, b, c)``; undefined when ``sigma_cur`` or ``sigmabar_cur`` is 0."""
    a_p, s_p, sb_p, s1 = _bridge_state(spec, t_prev)
    a_c, s_c, sb_c, _ = _bridge_state(spec, t_cur)
    alpha_1 = float(alpha_of(spec, 1.0))
    a = a_p * s_p * sb_p / (a_c * s_c * sb_c)
    b = a_p / s1 * (sb_p**2 - sb_c * s_p * sb_p / s_c)
    c = a_p / (alpha_1 * s1) * (s_p**2 - s_c * s_p * sb_p / sb_c)
    return a, b, c


def sb_ode_coeffs(spec: ProcessSpec, t_prev: float, t_cur: float, n: int = 0) -> SbOdeCoeffs:
    """Coefficients of one ODE step, with the analytic boundary limits."""
    if spec.kind == "ouve":
        raise DomainError("the bridge ODE sampler needs an sbve/linear process")
    if not (0.0 <= t_prev < t_cur <= 1.0):
        raise DomainError(f"need 0 <= t_prev < t_cur <= 1, got {t_prev}, {t_cur}")
    a_p, s_p, sb_p, s1 = _bridge_state(spec, t_prev)
    if s1 <= 0:
        raise DomainError("degenerate process: sigma_1 = 0")
    alpha_1 = float(alpha_of(spec, 1.0))
    if t_cur == 1.0:
        w_x = a_p * sb_p**2 / s1
        w_y = a_p / alpha_1 * s_p**2 / s1
        return SbOdeCoeffs(n, 0.0, w_x, w_y, folded=True)
    if s_p == 0.0:
        return SbOdeCoeffs(n, 0.0, a_p, 0.0)
    a, b, c = sb_ode_coeffs_raw(spec, t_prev, t_cur)
    return SbOdeCoeffs(n, a, b, c)


def sb_ode_sample(
    spec: ProcessSpec,
    denoiser: Callable,
    y,
    grid: TimeGrid,
    record: bool = False,
) -> SampleRun:
    """Run ``x_{n-1} = a_n x_n + b_n D(x_n, y, t_n) + c_n y`` from ``x_N = y``."""
    ts = grid.times
    y = np.asarray(y)
    x = y.copy()
    traj = [x.copy()] if record else None
    for n in range(grid.n_steps, 0, -1):
        co = sb_ode_coeffs(spec, ts[n - 1], ts[n], n)
        d_out = np.asarray(denoiser(x, y, ts[n]))
        x = co.a * x + co.b * d_out + co.c * y
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state at step n={n} (t={ts[n]:.6g})")
        if record:
            traj.append(x.copy())
    if record:
        traj.reverse()
    return SampleRun(grid, x, traj, ts)


def reverse_sde_sample(
    spec: ProcessSpec,
    score_source: Callable,
    y,
    grid: TimeGrid,
    cfg: SimConfig,
    prior_mean=None,
    prior_var: Optional[float] = None,
    record: bool = False,
) -> SampleRun:
    """Euler-Maruyama on the reverse OUVE SDE from ``t = 1`` to ``grid.t_min``.

    Each of ``cfg.n_paths`` paths starts from ``N(prior_mean, prior_var)``,
    by default centred on ``y`` with the kernel variance at ``t = 1``.  The
    true ``x_1`` marginal is offset by ``w_x(1) x0``; pass the exact prior
    when that matters.  ``score_source(x, y, t)`` is evaluated on arrays of
    shape ``(n_paths, d)``.  Real ``y`` gives real noise (variance ``dt``),
    complex ``y`` circular complex noise with ``E|dw|^2 = dt``.
    """
    if spec.kind != "ouve":
        raise DomainError("reverse_sde_sample integrates the OUVE reverse SDE")
    y = np.atleast_1d(np.asarray(y))
    is_complex = np.iscomplexobj(y) or (prior_mean is not None and np.iscomplexobj(prior_mean))
    rng = np.random.Generator(np.random.Philox(key=int(cfg.seed)))

    def noise(shape):
        if is_complex:
            return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
        return rng.standard_normal(shape)

    mean0 = y if prior_mean is None else np.atleast_1d(np.asarray(prior_mean))
    var0 = sigma2_of(spec, 1.0) if prior_var is None else float(prior_var)
    shape = (cfg.n_paths, y.size)
    x = mean0 + math.sqrt(var0) * noise(shape)
    ts = grid.times
    traj = [x.copy()] if record else None
    for n in range(grid.n_steps, 0, -1):
        t = ts[n]
        h = t - ts[n - 1]
        g = g_of(spec, t)
        drift = -spec.gamma * (y - x) + g**2 * np.asarray(score_source(x, y, t))
        x = x + drift * h + g * math.sqrt(h) * noise(shape)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state at step n={n} (t={t:.6g})")
        if record:
            traj.append(x.copy())
    if record:
        traj.reverse()
    return SampleRun(grid, x, traj, ts)


def dump_trajectory_csv(path, run: SampleRun) -> None:
    """Rows ``step, t, re_0, im_0, re_1, im_1, ...`` (single trajectory)."""
    if run.trajectory is None:
        raise DomainError("run was not recorded")
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        d = np.asarray(run.trajectory[0]).size
        wr.writerow(["step", "t"] + [f"{p}_{i}" for i in range(d) for p in ("re", "im")])
        for step, (t, x) in enumerate(zip(run.times, run.trajectory)):
            flat = np.asarray(x, dtype=complex).ravel()
            wr.writerow([step, repr(float(t))] + [repr(float(v)) for z in flat for v in (z.real, z.imag)])
