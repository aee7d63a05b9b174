"""
Denoising loss versus noise-prediction loss
===========================================

In a one-dimensional Gaussian world the best denoiser is affine and known
in closed form.  Training an affine model with either loss lands on it:
the two objectives differ only by a reparameterisation of the network.
"""

import numpy as np

from bridgelab import GaussianWorld, ProcessSpec, mmse_denoiser, train_affine
from bridgelab.oracle import bayes_risk

spec = ProcessSpec.ouve(1.5, c=0.01, k=10.0)
world = GaussianWorld(m0=[1.0], s0sq=0.25, y=[0.0])
t = 0.5

best = mmse_denoiser(world, spec, t)
print(f"closed form: slope {best.a:.5f}, offset {best.offset(world.y)[0]:.5f}")
print(f"Bayes risk: {bayes_risk(world, spec, t):.5f}")

for kind in ("denoise", "score"):
    res = train_affine(world, spec, kind, steps=20_000, lr=1e-2, seed=0, t=t)
    d = res.denoiser
    # the score loss equals the denoising loss divided by the kernel variance
    tail = res.trace[-2000:].mean()
    print(f"{kind:>8}: slope {d.a:.5f}, offset {d.offset(world.y)[0]:.5f}, late loss {tail:.5f}")

# Data prediction (target x0 rather than the kernel mean) has its own optimum.
x0_best = mmse_denoiser(world, ProcessSpec.sbve(c=0.01), t, target="x0")
res = train_affine(world, ProcessSpec.sbve(c=0.01), "sb", steps=20_000, seed=0, t=t)
print(f"\nx0 target: closed form slope {x0_best.a:.4f}, trained {res.denoiser.a:.4f}")
print("identical SGD paths for both losses:", np.allclose(
    train_affine(world, spec, "denoise", steps=200, seed=3, t=t).denoiser.params,
    train_affine(world, spec, "score", steps=200, seed=3, t=t).denoiser.params,
))
