"""Dilating through a decreasing family of closed sets and reading the target back as shadows."""
from shadowbarrier import ClosedSet, DiscreteMeasure, dilate, shadow_decomposition_check

F1 = ClosedSet.points([-2, -1, 1, 2])
F2 = ClosedSet.points([-2, 2])
m = DiscreteMeasure.delta(0.0)
print("dilate delta_0 through F1:", dilate(m, F1))
print("dilate delta_0 through F2:", dilate(m, F2))

rep = shadow_decomposition_check([(0.5, m), (0.5, DiscreteMeasure.delta(0.5))], [F1, F2])
print(rep.summary())
print("per prefix:", rep.data["per_prefix"])
