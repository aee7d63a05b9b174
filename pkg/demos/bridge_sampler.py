"""
The bridge ODE sampler
======================

With a perfect data predictor the sampler walks exactly along the mean
interpolation between y and x0, whatever the number of steps.  With a
biased predictor, more steps do not rescue it: the last step simply
returns the predictor output.
"""

import numpy as np

from bridgelab import ProcessSpec, TimeGrid, kernel_params, sb_ode_coeffs, sb_ode_sample

bridge = ProcessSpec.sbve()
rng = np.random.default_rng(0)
x0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
y = x0 + 0.3 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))

for n in (1, 4, 30):
    run = sb_ode_sample(bridge, lambda x, yy, t: x0, y, TimeGrid(n))
    print(f"N={n:>2}: max |x_hat - x0| = {np.max(np.abs(run.final - x0)):.1e}")

# The step coefficients.  At t = 1 two of them diverge but cancel, since
# the state there equals y; the first step is applied in its limit form.
grid = TimeGrid(5)
for n in range(grid.n_steps, 0, -1):
    co = sb_ode_coeffs(bridge, grid.times[n - 1], grid.times[n], n)
    print(f"step {n}: a={co.a:.4f} b={co.b:.4f} c={co.c:.4f}{'  (folded)' if co.folded else ''}")

# A shrunken predictor: the trajectory departs from the oracle path.
run = sb_ode_sample(bridge, lambda x, yy, t: 0.8 * x0, y, TimeGrid(30), record=True)
for t, x in list(zip(run.times, run.trajectory))[::6]:
    gap = np.max(np.abs(x - kernel_params(bridge, t).mean(x0, y)))
    print(f"t={t:.2f}: distance from the oracle path {gap:.3f}")
