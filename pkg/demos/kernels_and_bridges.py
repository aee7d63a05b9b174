"""
Perturbation kernels side by side
=================================

The OUVE process drifts from the clean spectrogram toward the noisy one
while its noise grows; the bridge pins both ends and puts its noise in
the middle.  This prints both kernels on a coarse time grid.
"""

import numpy as np

from bridgelab import ProcessSpec, kernel_params, sb_potentials

ouve = ProcessSpec.ouve()
bridge = ProcessSpec.sbve()

print(f"{'t':>5} | {'OUVE w_x':>9} {'w_y':>7} {'std':>7} | {'bridge w_x':>10} {'w_y':>7} {'std':>7}")
for t in np.linspace(0.0, 1.0, 11):
    o, b = kernel_params(ouve, t), kernel_params(bridge, t)
    print(f"{t:5.2f} | {o.w_x:9.4f} {o.w_y:7.4f} {o.std:7.4f} | {b.w_x:10.4f} {b.w_y:7.4f} {b.std:7.4f}")

# At t = 1 the OUVE mean still remembers x0 (w_x = e^{-1.5}) and carries
# noise, so sampling has to start from a mismatched prior.  The bridge
# reaches y exactly.
print("\nOUVE residual weight on x0 at t=1:", kernel_params(ouve, 1.0).w_x)

# The bridge marginal is the product of two Gaussian potentials: one
# anchored at x0 (growing variance) and one at y (shrinking variance).
pot = sb_potentials(bridge, 0.5)
print("potential variances at t=0.5: psi_bar", pot.psi_bar.var, " psi", pot.psi.var)
print("their harmonic combination:  ", 1 / (1 / pot.psi_bar.var + 1 / pot.psi.var))
print("bridge marginal variance:    ", kernel_params(bridge, 0.5).var)
