"""Left-monotone embedding of a two-point source into a three-point target.

The simulated joint law of (start, stop) is compared with the left-curtain coupling.
"""
import numpy as np

from shadowbarrier import DiscreteMeasure, GridSpec, left_curtain, lm_solve, simulate, verify_shadow_residual, wasserstein1
from shadowbarrier.plotting import plot_coupling

mu = DiscreteMeasure([-1, 1], [0.5, 0.5])
nu = DiscreteMeasure([-2, 0, 2], [1 / 3] * 3)
coupling, plan = lm_solve(mu, nu, GridSpec.covering(mu, nu, h=0.05))
curtain = left_curtain(mu, nu)
for x in mu.atoms:
    print(f"start {x:+.0f}: exact {coupling.conditional(x)}")

levels = [float(np.exp(-x)) for x in mu.atoms]
s = simulate(plan, mu, 100_000, seed=3, levels=levels)
for x, _, c in s.joint_coupling().rows:
    print(f"start {x:+.0f}: simulated W1 to curtain {wasserstein1(c.scale(1 / c.mass), curtain.conditional(x)):.4f}")
print(verify_shadow_residual(s, None, nu).summary())
plot_coupling("left_curtain.svg", curtain)
