"""
Seeded ensembles of random extensions
=====================================

Each trial draws a fiber family from a derived seed, so every row of a report
can be regenerated on its own.
"""

# %%
from ergolab.cellsys import CellSpace, skew_from_product
from ergolab.extlab import Cocycle, EnsembleSpec, lift_experiment, rwm_functional, rwm_identity_closed_form, sample_extension
from ergolab.zoo import canonical_family, make_cyclic_rotation, make_identity

# %%
# For S x Id the functional is a constant that does not depend on j.
fam = canonical_family(CellSpace(8), 4)
control = rwm_identity_closed_form(fam, 4)
trivial = skew_from_product(make_cyclic_rotation(8), make_identity(8))
print(control, rwm_functional(trivial, fam, 4, 64))

# %%
# Random fiber permutations average the correlations away.
spec = EnsembleSpec(base="cyclic_rotation(n=8)", fiber_size=8, trials=20, master_seed=20240602)
rep = lift_experiment(spec, "rwm", {"N": 4, "j": 64, "fiber_i_max": 4})
print(rep.summary()["observed_fraction"], [str(v) for v in rep.values[:5]])

# %%
# Trial 3 on its own, with its cocycle along the base orbit of cell 0.
r = sample_extension(spec, 3)
coc = Cocycle(r)
for n in (1, 2, 8):
    print(n, coc(0, n).forward.tolist())

# %%
# Near-identity fibers: a single transposition per base cell.
near = EnsembleSpec(base="cyclic_rotation(n=8)", fiber_size=8, sampler="near_identity", transpositions=1, trials=20)
rep = lift_experiment(near, "rwm", {"N": 4, "j": 64, "fiber_i_max": 4})
print(rep.observed_fraction)

# %%
# Entropy blow-up under random conjugation of S x (Bernoulli shift).
blow = EnsembleSpec(
    base="odometer(b=2, l=4)", fiber_size=4096, trials=10, master_seed=1, fiber="bernoulli_cyclic(k=2, L=12)"
)
rep = lift_experiment(blow, "hp_blowup", {"coord": 0, "j_list": [3, 4], "length": 4})
print(rep.extra["H_xi"] / 2, [round(v, 4) for v in rep.values])
