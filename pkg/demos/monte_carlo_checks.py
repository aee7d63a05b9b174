"""
Checking the closed forms by simulation
=======================================

Every kernel formula is cheap to state and easy to get subtly wrong, so
each one is pitted against brute-force Euler-Maruyama runs and against
finite-difference checks of the bridge potentials.
"""

import numpy as np

from bridgelab import ProcessSpec, SimConfig, kernel_params, verify_forward_marginal
from bridgelab.simulate import ito_isometry_check, nelson_residual, pde_convergence, pde_residual

ouve = ProcessSpec.ouve()
bridge = ProcessSpec.sbve()
cfg = SimConfig(dt=1e-3, n_paths=10_000, seed=1)

# Forward OUVE runs: empirical mean and variance against the kernel.
for t in (0.25, 0.5, 0.9):
    report = verify_forward_marginal(ouve, [1.0 + 0.5j], [0.0], cfg, t)
    for line in report.summary_lines():
        print(line)

# The bridge drift blows up like 1/(1 - t); the integrator shrinks its
# steps geometrically there and stops just short of t = 1.
report = verify_forward_marginal(bridge, [1.0], [0.0], cfg, 0.999)
print("\n".join(report.summary_lines()))

# The potentials solve a backward and a forward heat equation.
r = pde_residual(bridge, 0.5, 0.3, 1.0, 0.0)
print(f"\nPDE residuals (relative): {r.r_psi:.2e}, {r.r_psi_bar:.2e}")
print("residual ratio per step halving:", np.round(pde_convergence(bridge, 0.5, 0.3, 1.0, 0.0), 4).tolist())

# Their log-gradients add up to the marginal score.  Perturbing the
# marginal variance by one percent breaks that visibly.
kp = kernel_params(bridge, 0.5)
xs = kp.mean(1.0, 0.0) + kp.std * np.linspace(-2, 2, 5)
print("gradient identity residual:", nelson_residual(bridge, 0.5, xs, 1.0, 0.0))
print("with a 1% variance error:  ", nelson_residual(bridge, 0.5, xs, 1.0, 0.0, var_scale=1.01))

# The variance integral itself, sampled directly as a stochastic integral.
for f in (0.0, -1.5):
    print("\n".join(ito_isometry_check(ProcessSpec.linear(f), 1.0, cfg).summary_lines()))
