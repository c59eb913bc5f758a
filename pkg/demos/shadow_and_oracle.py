"""Shadow of a point mass in a two-point target, checked by the linear program.

Then the associativity of shadows on a random instance.
"""
import numpy as np

from shadowbarrier import DiscreteMeasure, shadow, shadow_associativity_check, shadow_lp_oracle
from shadowbarrier.plotting import plot_potentials
from shadowbarrier.testing import random_feasible_pair, random_split

eta = DiscreteMeasure.delta(0.0, 0.5)
nu = DiscreteMeasure([-1, 1], [0.5, 0.5])
S = shadow(eta, nu)
print("shadow        ", S)
print("linear program", shadow_lp_oracle(eta, nu))

rng = np.random.default_rng(1)
eta, nu = random_feasible_pair(rng, 20)
e1, e2 = random_split(rng, eta)
print(shadow_associativity_check(e1, e2, nu).summary())

plot_potentials("shadow_potentials.svg", {"eta": eta, "shadow": shadow(eta, nu), "nu": nu})
print("wrote shadow_potentials.svg")
