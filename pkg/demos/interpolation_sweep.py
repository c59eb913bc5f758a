"""Switching from the Root rule to the left-monotone rule at time lambda.

Small lambda gives a coupling close to the left curtain, large lambda the Root coupling.
"""
from shadowbarrier import DiscreteMeasure, GridSpec, convergence_sweep
from shadowbarrier.plotting import plot_sweep

mu = DiscreteMeasure.from_quantiles("normal", 64, scale=0.5)
nu = DiscreteMeasure.from_quantiles("normal", 64)
h = 0.05
rep = convergence_sweep(mu, nu, [h * h, 0.1, 0.5, 1.0, 2.0, 5.0, float("inf")], GridSpec.covering(mu, nu, h=h))
print(f"{'lambda':>8} {'to Root':>9} {'to curtain':>11}")
for r in rep.data["rows"]:
    print(f"{r['lambda_snapped']:8.4f} {r['d_root']:9.4f} {r['d_lm']:11.4f}")
print(rep.summary())
plot_sweep("sweep.svg", rep.data["rows"])
