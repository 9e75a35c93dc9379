"""
Sequence entropy along lag progressions
=======================================
"""

# %%
import math


from ergolab import rng
from ergolab.cellsys import SkewSystem, skew_from_product
from ergolab.seqentropy import Partition, SequenceFamily, conjugation_entropy_experiment, fiber_lift, h_j, hp_estimate, independence_defect
from ergolab.zoo import (
    block_partition,
    coordinate_labels,
    coordinate_partition,
    make_bernoulli_cyclic,
    make_cyclic_rotation,
    make_identity,
    make_odometer,
)

# %%
# On the cyclic Bernoulli model, the coordinate-0 partition refined along
# {j, 2j, ..., 5j} stays fully independent, so h_j = ln 2.
bern = make_bernoulli_cyclic(2, 16)
xi = coordinate_partition(bern, 0)
fam = SequenceFamily.progression(5)
for j in (1, 2, 3):
    print(j, h_j(bern, xi, fam.lags(j)), math.log(2))

# %%
# A rotation cuts the circle into few arcs, so its sequence entropy decays.
rot = make_cyclic_rotation(1024)
est = hp_estimate(rot, block_partition(rot.space, 4), SequenceFamily.progression(8), range(1, 9))
print(est.value, est.note)

# %%
# The independence defect of a two-coordinate window vanishes once the lag
# exceeds the window width.
eta = Partition(bern.space, coordinate_labels(bern, 0) + 2 * coordinate_labels(bern, 1))
for j in (1, 2, 3):
    print(f"j={j}: defect {independence_defect(bern, eta, [j, 2 * j, 3 * j])}")

# %%
# Conjugating S x T by a random fiber map J leaves h_j unchanged when the
# partition is moved along with it.
base = make_odometer(2, 4)
fiber = make_bernoulli_cyclic(2, 12)
r = skew_from_product(base, fiber)
seeds = [rng.derive_seed(3, x) for x in range(base.n)]
jq = SkewSystem(make_identity(base.n), fiber.space, rng.random_permutations(seeds, fiber.n))
rep = conjugation_entropy_experiment(r, jq, fiber_lift(r, coordinate_labels(fiber, 0)), SequenceFamily.progression(4), range(1, 5))
for row in rep.rows:
    print(row.j, row.h_conjugated, row.identity_gap, row.exceeds_half)
