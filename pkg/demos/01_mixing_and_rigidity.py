"""
Mixing and rigidity on finite cell systems
==========================================

Every system here is a permutation of equal-mass cells, so the functionals
come back as exact fractions.
"""

# %%
from fractions import Fraction

from ergolab import asymptotics as asy
from ergolab.cellsys import CellSet
from ergolab.zoo import canonical_family, coordinate_family, make_bernoulli_cyclic, make_cyclic_rotation, make_identity

# %%
# The cyclic Bernoulli shift on binary words of length 10.  Events on
# coordinate 0 and 1 decorrelate exactly once the shifted windows stop
# overlapping, and come back when j wraps around the word length.
bern = make_bernoulli_cyclic(2, 10)
fam = coordinate_family(bern, [0, 1])
for j in range(0, 12):
    print(f"phi(N=4, j={j:2d}) = {asy.phi_mix(bern, fam, 4, j)}")

# %%
# A rotation on n cells returns to the identity after n steps, so the
# rigidity functional is exactly zero there and positive in between.
rot = make_cyclic_rotation(144)
fam = canonical_family(rot.space, 16)
for j in (1, 55, 89, 143, 144, 288):
    print(f"psi(N=8, j={j:3d}) = {asy.psi_rigid(rot, fam, 8, j)}")

# %%
# The partial-rigidity functional with a = 1 is the plain rigidity functional.
print(asy.psi_partial(rot, fam, Fraction(1), 8, 89) == asy.psi_rigid(rot, fam, 8, 89))

# %%
# Scans report every scanned lag and which ones meet the 1/N threshold.
rep = asy.scan(bern, coordinate_family(bern, [0]), 2, range(0, 21), "phi")
print(rep.to_csv())

# %%
# Triple correlations: on the identity both directions equal mu(A).
ident = make_identity(16)
A = CellSet.from_members(ident.space, range(4))
for m in (1, 2, 3):
    print(m, asy.triple_correlation(ident, A, m, "forward"), asy.asymmetry_gap(ident, A, m))
