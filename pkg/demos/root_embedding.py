"""Root barrier for a standard normal target, simulated and verified.

Stopping every path at a fixed time is shown to fail the same checks.
"""
from shadowbarrier import (DiscreteMeasure, GridSpec, fixed_time_samples, root_solve, simulate,
                           verify_embedding, verify_shadow_residual)
from shadowbarrier.plotting import plot_barrier

mu, nu = DiscreteMeasure.delta(0.0), DiscreteMeasure.from_quantiles("normal", 64)
grid = GridSpec.covering(mu, nu, h=0.05)
surface, barrier = root_solve(mu, nu, grid)
print(f"scheme: {surface.n_levels} levels, E[tau] = {surface.mean_stopping_time():.4f}, "
      f"Var(nu) - Var(mu) on the grid = {grid.project(nu).variance:.4f}")
plot_barrier("root_barrier.svg", barrier)

levels = [0.0, 0.25, 0.5, 1.0]
s = simulate(barrier, mu, 100_000, seed=7, levels=levels)
print(verify_embedding(s, mu, nu).summary())
print(verify_shadow_residual(s, None, nu).summary())

ctrl = fixed_time_samples(mu, grid, 0.1, 100_000, seed=8, levels=levels)
print("fixed-time control:", verify_shadow_residual(ctrl, None, nu).summary())
