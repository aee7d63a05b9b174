"""Verification suites driven by ``bridgelab verify``."""
from __future__ import annotations

import time

import numpy as np

from .config import RunConfig, derive_seed
from .kernel import kernel_params
from .objective import LossWeights, dsm_loss, score_from_denoiser, score_loss
from .oracle import GaussianWorld, grad_check, sample_batch, true_marginal, true_score
from .process import ProcessSpec, TimeGrid, sigma2_of
from .report import CheckRecord, Report
from .sampler import reverse_sde_sample, sb_ode_coeffs, sb_ode_sample
from .simulate import (
    SimConfig,
    ito_isometry_check,
    nelson_residual,
    pde_convergence,
    pde_residual,
    verify_forward_marginal,
)

__all__ = ["SUITES", "run_suite"]

OUVE_TIMES = (0.25, 0.5, 0.9)
SB_TIMES = (0.5, 0.999)


def _specs(cfg: RunConfig):
    return cfg.process_spec("ouve"), cfg.process_spec("sbve")


def kernels(cfg: RunConfig) -> list:
    ouve, sb = _specs(cfg)
    scale = 1.0 + cfg["verify"]["corrupt_variance"]
    thr = cfg["verify"]["threshold"]
    records = []
    ts = np.linspace(0.02, 1.0, 50)
    for spec in (ouve, sb):
        closed = np.asarray(sigma2_of(spec, ts))
        quad = np.asarray(sigma2_of(spec, ts, quadrature=True))
        rel = np.max(np.abs(closed - quad) / quad)
        records.append(CheckRecord.bound(f"{spec.kind} sigma2 closed form vs quadrature (max rel)", rel, 1e-8))
    sim = cfg.sim("sim")
    x0, y = np.array([1.0 + 0.5j]), np.array([0.2 - 1.0j])
    for spec, times in ((ouve, OUVE_TIMES), (sb, SB_TIMES)):
        for t in times:
            rep = verify_forward_marginal(spec, x0, y, sim, t, threshold=thr, var_scale=scale)
            records.extend(rep.records)
    return records


def pde(cfg: RunConfig) -> list:
    _, sb = _specs(cfg)
    records = []
    for t in (0.25, 0.5, 0.75):
        kp = kernel_params(sb, t)
        # points within two marginal standard deviations, where the densities are not underflowing
        for x in kp.mean(1.0, 0.0) + kp.std * np.array([-2.0, 0.0, 1.0]):
            r = pde_residual(sb, t, x, 1.0, 0.0)
            records.append(CheckRecord.bound(f"pde psi t={t} x={x:.4f}", abs(r.r_psi), 1e-5))
            records.append(CheckRecord.bound(f"pde psi_bar t={t} x={x:.4f}", abs(r.r_psi_bar), 1e-5))
    ratios = pde_convergence(sb, 0.5, 0.3, 1.0, 0.0)
    for i, (rp, rpb) in enumerate(ratios):
        records.append(CheckRecord.bound(f"pde psi halving ratio #{i}", rp, 0.5, expected=4.0))
        records.append(CheckRecord.bound(f"pde psi_bar halving ratio #{i}", rpb, 0.5, expected=4.0))
    return records


def nelson(cfg: RunConfig) -> list:
    _, sb = _specs(cfg)
    scale = 1.0 + cfg["verify"]["corrupt_variance"]
    records = []
    for t in (0.1, 0.3, 0.5, 0.7, 0.9):
        kp = kernel_params(sb, t)
        mu = kp.mean(1.0, 0.0)
        xs = mu + np.sqrt(kp.var) * np.linspace(-3.0, 3.0, 5)
        res = nelson_residual(sb, t, xs, 1.0, 0.0, var_scale=scale)
        records.append(CheckRecord.bound(f"nelson gradient residual t={t}", res, 1e-9))
    return records


def ito(cfg: RunConfig) -> list:
    c, k = cfg["process"]["c"], cfg["process"]["k"]
    sim = cfg.sim("ito")
    records = []
    for f in (0.0, -cfg["process"]["gamma"]):
        spec = ProcessSpec.linear(f, c=c, k=k)
        rep = ito_isometry_check(spec, 1.0, sim, threshold=cfg["verify"]["threshold"])
        for r in rep.records:
            r.name += f" f={f:g}"
        records.extend(rep.records)
    return records


def sampler(cfg: RunConfig) -> list:
    ouve, sb = _specs(cfg)
    records = []
    worst = 0.0
    for tp in np.linspace(0.0, 0.9, 10):
        for tc in np.linspace(tp + 0.05, 0.99, 6):
            co = sb_ode_coeffs(sb, tp, tc)
            kc, kp = kernel_params(sb, tc), kernel_params(sb, tp)
            worst = max(worst, abs(co.a * kc.w_x + co.b - kp.w_x), abs(co.a * kc.w_y + co.c - kp.w_y))
    records.append(CheckRecord.bound("ode coefficient identities (max abs)", worst, 1e-10))
    rng = np.random.default_rng(derive_seed(cfg.seed, "sample"))
    x0 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    for n in (1, 4, 64):
        run = sb_ode_sample(sb, lambda x, yy, t: x0, y, TimeGrid(n, 0.0))
        records.append(CheckRecord.bound(f"ode sampler oracle exactness N={n}", np.max(np.abs(run.final - x0)), 1e-12))
    world = GaussianWorld([1.0], 0.25, [0.0])
    m1, v1 = true_marginal(world, ouve, 1.0)
    sim = cfg.sim("reverse")
    t_min = 0.03
    run = reverse_sde_sample(
        ouve, lambda x, yy, t: true_score(world, ouve, t, x), world.y, TimeGrid(200, t_min),
        SimConfig(sim.dt, sim.n_paths, sim.seed), prior_mean=m1, prior_var=v1,
    )
    m, v = true_marginal(world, ouve, t_min)
    f = run.final[:, 0]
    n = f.size
    thr = cfg["verify"]["threshold"]
    records.append(CheckRecord.statistical("reverse sde mean", m[0], f.mean(), np.sqrt(f.var(ddof=1) / n), thr))
    dev2 = (f - f.mean()) ** 2
    records.append(CheckRecord.statistical("reverse sde var", v, f.var(ddof=1), dev2.std(ddof=1) / np.sqrt(n), thr))
    return records


def losses(cfg: RunConfig) -> list:
    ouve, _ = _specs(cfg)
    rng = np.random.default_rng(derive_seed(cfg.seed, "losses"))
    worst = 0.0
    for _ in range(100):
        t = rng.uniform(0.05, 1.0)
        kp = kernel_params(ouve, t)
        d = 6
        x0 = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        y = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        z = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) / np.sqrt(2)
        x_t = kp.mean(x0, y) + kp.std * z
        raw = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        s = raw / kp.std
        l_dsm = dsm_loss(s, x_t, kp, x0, y, LossWeights("sigma2"))
        l_score = score_loss(raw, z, kp.std)
        denoised = x_t + kp.var * s
        l_den = kp.var * float(np.mean(np.abs(score_from_denoiser(denoised, x_t, kp.var) - (kp.mean(x0, y) - x_t) / kp.var) ** 2))
        worst = max(worst, abs(l_dsm - l_score), abs(l_dsm - l_den))
    records = [CheckRecord.bound("loss identities dsm == score == denoiser form (max abs)", worst, 1e-12)]
    world = GaussianWorld([1.0, -0.5], 0.25, [0.3, 0.7])
    batch = sample_batch(world, ouve, 0.5, rng)
    theta = rng.standard_normal(2 + world.dim)
    for kind in ("denoise", "score", "sb"):
        records.append(CheckRecord.bound(f"grad check {kind}", grad_check(kind, theta, batch, 1e-5), 1e-6))
    return records


SUITES = {
    "kernels": kernels,
    "pde": pde,
    "nelson": nelson,
    "ito": ito,
    "sampler": sampler,
    "losses": losses,
}


def run_suite(cfg: RunConfig, name: str) -> Report:
    if name != "all" and name not in SUITES:
        raise KeyError(name)
    names = list(SUITES) if name == "all" else [name]
    start = time.perf_counter()
    report = Report(name)
    for n in names:
        report.extend(SUITES[n](cfg))
    report.wall_time = time.perf_counter() - start
    return report
