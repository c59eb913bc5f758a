"""Left-monotone couplings through a chain of two targets, stage by stage."""
from shadowbarrier import ClosedSet, DiscreteMeasure, dilate, max_atom_discrepancy, multi_marginal_lm, obstructed_shadow

mu = DiscreteMeasure([-1, 1], [0.5, 0.5])
nu1 = DiscreteMeasure([-2, 0, 2], [1 / 3] * 3)
nu2 = dilate(nu1, ClosedSet.points([-3, 0, 3]))
stages = multi_marginal_lm(mu, [nu1, nu2])
for q in mu.atoms:
    shadows = obstructed_shadow(mu.restrict((None, q)), [nu1, nu2])
    for i, (c, S) in enumerate(zip(stages, shadows), start=1):
        print(f"q={q:+.0f} stage {i}: {c.restricted_target(q)}  (discrepancy {max_atom_discrepancy(c.restricted_target(q), S):.1e})")
