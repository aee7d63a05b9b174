"""Acceptance criteria, each at its stated tolerance and runtime budget."""
import json
import math
import time

import numpy as np

from bridgelab.cli import main, synthetic_pair
from bridgelab.config import RunConfig
from bridgelab.kernel import kernel_params
from bridgelab.objective import LossWeights, dsm_loss, score_from_denoiser, score_loss
from bridgelab.oracle import (
    GaussianWorld,
    grad_check,
    mmse_denoiser,
    sample_batch,
    train_affine,
    true_marginal,
    true_score,
)
from bridgelab.process import ProcessSpec, TimeGrid, sigma2_of
from bridgelab.sampler import reverse_sde_sample, sb_ode_coeffs, sb_ode_sample
from bridgelab.signal import compress, decompress, istft, si_sdr, stft
from bridgelab.simulate import (
    SimConfig,
    nelson_residual,
    pde_convergence,
    pde_residual,
    verify_forward_marginal,
)

OUVE = ProcessSpec.ouve()  # gamma 1.5, c ~ 0.01151, k 10
SBVE = ProcessSpec.sbve()


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_kernel_quadrature_agreement(acceptance):
    start = time.perf_counter()
    ts = np.linspace(0.02, 1.0, 50)
    worst = 0.0
    for spec in (OUVE, SBVE):
        closed = np.asarray(sigma2_of(spec, ts))
        quad = np.asarray(sigma2_of(spec, ts, quadrature=True))
        worst = max(worst, float(np.max(np.abs(closed - quad) / quad)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 1.0
    assert acceptance(1, "closed-form variance vs quadrature", ok, f"max rel err {worst:.2e}, {elapsed:.2f} s")


def test_ouve_forward_monte_carlo(acceptance):
    start = time.perf_counter()
    zs, ok = [], True
    for t in (0.25, 0.5, 0.9):
        rep = verify_forward_marginal(OUVE, [1.0], [0.0], SimConfig(1e-3, 10_000, 100), t, threshold=4.0)
        ok &= rep.passed
        zs += [abs(r.z) for r in rep.records]
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    assert acceptance(2, "OUVE forward moments within 4 stderr", ok, f"max |z| {max(zs):.2f}, {elapsed:.1f} s")


def test_sb_forward_monte_carlo(acceptance):
    start = time.perf_counter()
    rep = verify_forward_marginal(SBVE, [1.0], [0.0], SimConfig(1e-3, 10_000, 200), 0.999, threshold=4.0)
    elapsed = time.perf_counter() - start
    zmax = max(abs(r.z) for r in rep.records)
    ok = rep.passed and elapsed < 60.0
    assert acceptance(3, "bridge forward moments at t=0.999 within 4 stderr", ok, f"max |z| {zmax:.2f}, {elapsed:.1f} s")


def test_pde_residuals(acceptance):
    worst = 0.0
    for t in (0.25, 0.5, 0.75):
        kp = kernel_params(SBVE, t)
        for x in kp.mean(1.0, 0.0) + kp.std * np.array([-1.0, 0.0, 1.0]):
            r = pde_residual(SBVE, t, x, 1.0, 0.0, h_t=1e-4, h_x=1e-4)
            worst = max(worst, abs(r.r_psi), abs(r.r_psi_bar))
    r = pde_residual(SBVE, 0.5, 0.3, 1.0, 0.0)
    worst = max(worst, abs(r.r_psi), abs(r.r_psi_bar))
    ratios = pde_convergence(SBVE, 0.5, 0.3, 1.0, 0.0)
    ok = worst < 1e-5 and bool(np.all(np.abs(ratios - 4.0) < 0.2))
    assert acceptance(4, "potential PDE residuals and second-order convergence", ok,
                      f"max residual {worst:.2e}, halving ratios {np.round(ratios.ravel(), 3).tolist()}")


def test_nelson_identity(acceptance):
    worst = 0.0
    for t in (0.1, 0.3, 0.5, 0.7, 0.9):
        kp = kernel_params(SBVE, t)
        xs = kp.mean(1.0, 0.0) + kp.std * np.linspace(-2.0, 2.0, 5)
        worst = max(worst, nelson_residual(SBVE, t, xs, 1.0, 0.0))
    assert acceptance(5, "potential gradients sum to the marginal score", worst < 1e-9, f"max residual {worst:.2e}")


def test_loss_equivalence(acceptance):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        kp = kernel_params(OUVE, rng.uniform(0.02, 1.0))
        x0, y, raw = cplx(rng, 8), cplx(rng, 8), cplx(rng, 8)
        z = cplx(rng, 8) / math.sqrt(2)
        x_t = kp.mean(x0, y) + kp.std * z
        s = raw / kp.std
        dsm = dsm_loss(s, x_t, kp, x0, y, LossWeights("sigma2"))
        noise = score_loss(raw, z, kp.std)
        denoised = x_t + kp.var * s
        target = (kp.mean(x0, y) - x_t) / kp.var
        via_denoiser = kp.var * float(np.mean(np.abs(score_from_denoiser(denoised, x_t, kp.var) - target) ** 2))
        worst = max(worst, abs(dsm - noise), abs(dsm - via_denoiser))
    assert acceptance(6, "score-matching, noise-prediction and denoiser losses agree", worst < 1e-12,
                      f"max abs deviation {worst:.2e}")


def test_sampler_exactness(acceptance):
    rng = np.random.default_rng(7)
    x0, y = cplx(rng, 16), cplx(rng, 16)
    err = max(
        float(np.max(np.abs(sb_ode_sample(SBVE, lambda x, yy, t: x0, y, TimeGrid(n)).final - x0)))
        for n in (1, 4, 64)
    )
    ident = 0.0
    for tp in np.linspace(0.0, 0.95, 20):
        for tc in np.linspace(tp + 0.01, 1.0, 20):
            co = sb_ode_coeffs(SBVE, tp, min(tc, 1.0))
            kc, kp = kernel_params(SBVE, min(tc, 1.0)), kernel_params(SBVE, tp)
            if co.folded:
                # x_cur = y, so the y weight is a + c
                ident = max(ident, abs(co.b - kp.w_x), abs(co.a + co.c - kp.w_y))
            else:
                ident = max(ident, abs(co.a * kc.w_x + co.b - kp.w_x), abs(co.a * kc.w_y + co.c - kp.w_y))
    ok = err < 1e-12 and ident < 1e-10
    assert acceptance(7, "ODE sampler exactness and coefficient identities", ok,
                      f"recovery err {err:.1e}, identity err {ident:.1e}")


def test_reverse_sde_distribution(acceptance):
    start = time.perf_counter()
    world = GaussianWorld([1.0], 0.25, [0.0])
    m1, v1 = true_marginal(world, OUVE, 1.0)
    run = reverse_sde_sample(
        OUVE, lambda x, y, t: true_score(world, OUVE, t, x), world.y, TimeGrid(200, 0.03),
        SimConfig(1e-3, 10_000, 8), prior_mean=m1, prior_var=v1,
    )
    elapsed = time.perf_counter() - start
    m, v = true_marginal(world, OUVE, 0.03)
    f = run.final[:, 0]
    n = f.size
    z_mean = (f.mean() - m[0]) / math.sqrt(f.var(ddof=1) / n)
    z_var = (f.var(ddof=1) - v) / (np.std((f - f.mean()) ** 2, ddof=1) / math.sqrt(n))
    ok = abs(z_mean) < 4 and abs(z_var) < 4 and elapsed < 60.0
    assert acceptance(8, "reverse SDE terminal moments within 4 stderr", ok,
                      f"z_mean {z_mean:+.2f}, z_var {z_var:+.2f}, {elapsed:.1f} s")


def test_toy_training(acceptance):
    world = GaussianWorld([1.0], 0.25, [0.0])
    ref = mmse_denoiser(world, OUVE, 0.5)
    den = train_affine(world, OUVE, "denoise", steps=20_000, lr=1e-2, seed=1, t=0.5)
    sco = train_affine(world, OUVE, "score", steps=20_000, lr=1e-2, seed=1, t=0.5)

    def coeffs(d):
        # with y fixed only the slope and the offset are identifiable
        return np.concatenate(([d.a], d.offset(world.y)))

    err_den = float(np.max(np.abs(coeffs(den.denoiser) - coeffs(ref))))
    err_sco = float(np.max(np.abs(coeffs(sco.denoiser) - coeffs(ref))))
    rng = np.random.default_rng(9)
    batch = sample_batch(world, OUVE, None, rng)
    theta = rng.standard_normal(3)
    gc = max(grad_check(kind, theta, batch, 1e-5) for kind in ("denoise", "score", "sb"))
    ok = err_den < 1e-2 and err_sco < 1e-2 and gc < 1e-6
    assert acceptance(9, "affine training reaches the MMSE denoiser under both losses", ok,
                      f"denoise err {err_den:.1e}, score err {err_sco:.1e}, grad check {gc:.1e}")


def test_signal_pipeline(acceptance):
    x = np.random.default_rng(10).standard_normal(16000)
    rt = float(np.linalg.norm(istft(stft(x)).samples - x) / np.linalg.norm(x))
    sdr = si_sdr(np.array([1.0, 0.0]), np.array([1.0, 0.1]))
    s = stft(x)
    comp = float(np.max(np.abs(decompress(compress(s)).data - s.data) / np.maximum(np.abs(s.data), 1e-300)))
    ok = rt < 1e-6 and sdr == 20.0 and comp < 1e-9
    assert acceptance(10, "STFT round trip, SI-SDR example, compression inverse", ok,
                      f"round trip {rt:.1e}, SI-SDR {sdr!r} dB, compression {comp:.1e}")


def test_end_to_end_enhancement(acceptance, tmp_path):
    cfg = RunConfig()
    clean, noisy = synthetic_pair(cfg)
    x0, y = compress(stft(clean)).data, compress(stft(noisy)).data
    gain = np.sum((x0 * y.conj()).real, axis=0) / np.sum(np.abs(y) ** 2, axis=0)
    affine = tmp_path / "affine.json"
    affine.write_text(json.dumps({"a": 0.0, "b_x": gain.tolist(), "b0": 0.0}))

    results, ok = {}, True
    for kind in ("oracle-x0", "affine-file"):
        outs = []
        for rerun in ("a", "b"):
            out = tmp_path / f"{kind}-{rerun}"
            code = main(["sample", "--out", str(out), "--denoiser", kind, "--seed", "0",
                         "--set", f"sample.affine_file={affine}"])
            ok &= code == 0
            outs.append(out)
        m = json.loads((outs[0] / "metrics.json").read_text())
        before, after = float(m["si_sdr_in"]), float(m["si_sdr_out"])
        ok &= after > before
        ok &= (outs[0] / "enhanced.wav").read_bytes() == (outs[1] / "enhanced.wav").read_bytes()
        results[kind] = f"{before:.2f} -> {after:.2f} dB"
    assert acceptance(11, "sampling raises SI-SDR, bit-identical reruns", ok,
                      ", ".join(f"{k}: {v}" for k, v in results.items()))
