"""
Certified singularity test on correlation sequences
===================================================

The classifier integrates trapezoidal arc profiles against a spectral measure
given only through its Fourier coefficients, using Fejer sums with a
certified error bound.
"""

# %%
import numpy as np

from ergolab import spectral as sp
from ergolab.cellsys import CellSet
from ergolab.zoo import make_cyclic_rotation, make_random_automorphism

# %%
# A point mass at 0 is caught quickly: for each N some partition of the circle
# into P arcs leaves all but two arcs empty.
dirac = sp.CorrelationSequence.dirac(0, 64 * 64 * 8)
print(sp.classify_singular(dirac, [2, 4, 8], [4, 8, 16, 32, 64]).to_json())

# %%
# Lebesgue measure is band limited (only the zero coefficient is nonzero),
# so the arc integrals are exact and the count of small arcs stays at zero.
leb = sp.CorrelationSequence.lebesgue()
print(sp.classify_singular(leb, [2], [3, 10, 100, 1024]).verdict)

# %%
# Half and half: the absolutely continuous part keeps every arc above the threshold.
mix = sp.CorrelationSequence.mixture([(0.5, dirac), (0.5, leb)])
print(sp.classify_singular(mix, [2, 4, 8], [4, 8, 16, 32, 64]).verdict)

# %%
# Finite systems have purely atomic spectra.  The atoms can be read off the
# cycle structure and compared with the Fejer route.
t = make_random_automorphism(60, 7)
f = CellSet.from_members(t.space, range(10)).indicator().normalized()
atoms = sp.atomic_spectrum(t, f)
print(f"{len(atoms.atoms)} atoms, total mass {atoms.total_mass:.12f}")
P, d = 8, 512
res = sp.arc_integrals(sp.correlation_sequence(t, f, d), P, d)
exact = np.array([atoms.integrate(sp.Trapezoid(k, P)) for k in range(P)])
print("max error", np.abs(exact - res.values).max(), "certified bound", res.bound)

# %%
# An internal rotation: a short schedule is enough to witness singularity.
r = make_cyclic_rotation(3)
g = CellSet.from_members(r.space, [0]).indicator().normalized()
print(sp.classify_singular(sp.correlation_sequence(r, g, 64 * 64 * 4), [2, 4], [4, 8, 16, 32, 64]).verdict)
