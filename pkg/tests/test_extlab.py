from fractions import Fraction

import numpy as np
import pytest

from ergolab import rng
from ergolab.asymptotics import AdmissibleFunction
from ergolab.cellsys import CellSet, CellSpace, DenseFamily, SkewSystem, conjugate, power, skew_from_product
from ergolab.extlab import (
    Cocycle,
    EnsembleSpec,
    cocycle,
    conjugated_trivial_cocycle,
    family_profile,
    independent_factor_probe,
    lift_experiment,
    recurrence_functional,
    rwm_functional,
    rwm_identity_closed_form,
    sample_conjugator,
    sample_extension,
    sample_family,
)
from ergolab.zoo import (
    canonical_family,
    coordinate_event,
    make_bernoulli_cyclic,
    make_cyclic_rotation,
    make_identity,
    make_random_automorphism,
)


def random_skew(seed, nb=6, m=5):
    base = make_random_automorphism(nb, seed)
    seeds = [rng.derive_seed(seed, 1, x) for x in range(nb)]
    return SkewSystem(base, CellSpace(m), rng.random_permutations(seeds, m))


def test_constant_fiber_cocycle_is_power():
    u = make_random_automorphism(7, 3)
    base = make_cyclic_rotation(5)
    r = skew_from_product(base, u)
    coc = Cocycle(r)
    for n in (0, 1, 2, 9):
        un = power(u, n).forward
        for x in range(5):
            assert np.array_equal(coc(x, n).forward, un)
            assert np.array_equal(cocycle(r, x, n).forward, un)
    with pytest.raises(ValueError):
        coc.table(-1)


def test_cocycle_n1_is_fiber_map():
    r = random_skew(1)
    for x in range(r.n_base):
        assert np.array_equal(Cocycle(r)(x, 1).forward, r.table[x])


@pytest.mark.parametrize("seed", range(10))
def test_cocycle_law_and_slices(seed):
    r = random_skew(seed)
    coc = Cocycle(r, budget_cells=3 * r.n_base * r.n_fib)
    S = r.base.forward
    for x in range(r.n_base):
        for n in range(0, 9):
            assert np.array_equal(coc(x, n).forward, cocycle(r, x, n).forward)
        # C(x, n + k) = C(S^n x, k) C(x, n)
        for n, k in ((2, 3), (4, 1)):
            y = x
            for _ in range(n):
                y = int(S[y])
            lhs = cocycle(r, x, n + k).forward
            rhs = cocycle(r, y, k).forward[cocycle(r, x, n).forward]
            assert np.array_equal(lhs, rhs)
    # R^n (x, y) = (S^n x, C(x, n) y)
    for n in (1, 3, 7):
        rn = power(r.product, n).forward
        sn = power(r.base, n).forward
        tab = coc.table(n)
        expect = (sn[:, None] * r.n_fib + tab).ravel()
        assert np.array_equal(rn, expect)


def test_conjugated_trivial_cocycle_matches_conjugate():
    base = make_random_automorphism(6, 2)
    m = 5
    j = SkewSystem(make_identity(6), CellSpace(m), rng.random_permutations([rng.derive_seed(2, x) for x in range(6)], m))
    conj = conjugate(skew_from_product(base, make_identity(m)), j)
    coc = Cocycle(conj)
    for x in range(6):
        for p in (0, 1, 2, 5):
            assert np.array_equal(conjugated_trivial_cocycle(j, base, x, p).forward, coc(x, p).forward)


def brute_rwm(r, fam, N, j):
    m, nb = r.n_fib, r.n_base
    sets = [set(np.flatnonzero(fam.masks[i]).tolist()) for i in range(N)]
    best = Fraction(0)
    for i in range(N):
        for k in range(N):
            total = Fraction(0)
            for x in range(nb):
                for n in range(1, j + 1):
                    c = cocycle(r, x, n).forward
                    inter = sum(1 for y in sets[i] if int(c[y]) in sets[k])
                    dev = Fraction(inter, m) - Fraction(len(sets[i]), m) * Fraction(len(sets[k]), m)
                    total += dev * dev
            best = max(best, total / (nb * j))
    return best


@pytest.mark.parametrize("seed", range(4))
def test_rwm_against_pure_python(seed):
    r = random_skew(seed, nb=4, m=8)
    fam = canonical_family(r.fiber_space, 6)
    for N, j in ((1, 1), (3, 4), (6, 3)):
        assert rwm_functional(r, fam, N, j) == brute_rwm(r, fam, N, j)


def test_rwm_edge_cases():
    r = random_skew(0, nb=4, m=8)
    fam = DenseFamily(r.fiber_space, (CellSet(r.fiber_space, np.ones(8, bool)),))
    assert rwm_functional(r, fam, 1, 5) == 0
    ident = skew_from_product(r.base, make_identity(8))
    fam = canonical_family(r.fiber_space, 4)
    assert rwm_functional(ident, fam, 4, 3) == rwm_identity_closed_form(fam, 4) == Fraction(1, 16)
    with pytest.raises(ValueError):
        rwm_functional(r, fam, 5, 1)
    with pytest.raises(ValueError):
        rwm_functional(r, fam, 1, 0)


def test_rwm_control_fraction_zero_for_identity_sampler():
    spec = EnsembleSpec(base="cyclic_rotation(n=4)", fiber_size=8, sampler="near_identity", transpositions=0, trials=5)
    rep = lift_experiment(spec, "rwm", {"N": 4, "j": 4})
    assert rep.observed_fraction == 0
    assert rep.extra["control"] == Fraction(1, 16)


def test_recurrence_examples():
    base = make_cyclic_rotation(4)
    r = skew_from_product(base, make_identity(8))
    ff = canonical_family(r.fiber_space, 4)
    whole = CellSet(base.space, np.ones(4, bool))
    assert recurrence_functional(r, whole, [1, 2, 3], 4, ff) == 1
    single = CellSet.from_members(base.space, [0])
    assert recurrence_functional(r, single, [1], 4, ff) == 0
    assert recurrence_functional(r, single, [4], 4, ff) == Fraction(1, 4)
    with pytest.raises(ValueError):
        recurrence_functional(r, CellSet(base.space, np.zeros(4, bool)), [1], 4, ff)


def test_recurrence_antitone():
    r = random_skew(5, nb=8, m=8)
    ff = canonical_family(r.fiber_space, 6)
    A = CellSet.from_members(r.base.space, [0, 1, 2, 5, 6])
    vals_n = [recurrence_functional(r, A, [1, 2], N, ff) for N in (1, 2, 4, 8, 16, 64)]
    assert all(a >= b for a, b in zip(vals_n, vals_n[1:]))
    lags = [1, 2, 3, 4, 5]
    vals_l = [recurrence_functional(r, A, lags[:k], 2, ff) for k in range(1, 6)]
    assert all(a >= b for a, b in zip(vals_l, vals_l[1:]))


def test_recurrence_block_conjugator():
    # J constant on two halves of rotation(16): the conjugated cocycle is trivial
    # exactly where x and x + p lie in the same half
    base = make_cyclic_rotation(16)
    m = 16
    rows = np.array([np.arange(m) if x < 8 else make_cyclic_rotation(m).forward for x in range(16)])
    j = SkewSystem(make_identity(16), CellSpace(m), rows)
    conj = conjugate(skew_from_product(base, make_identity(m)), j)
    ff = canonical_family(conj.fiber_space, 8)
    whole = CellSet(base.space, np.ones(16, bool))
    for p in (1, 3, 7):
        assert recurrence_functional(conj, whole, [p], 64, ff) == Fraction(2 * (8 - p), 16)


def test_factor_probe_examples():
    base = make_cyclic_rotation(4)
    r = skew_from_product(base, make_random_automorphism(8, 1))
    fiber_b = np.zeros(8, bool)
    fiber_b[:3] = True
    E = CellSet(r.space, np.tile(fiber_b, 4))
    pr = independent_factor_probe(r, E, [1, 2])
    assert pr.e == Fraction(3, 8) and pr.defect == 0 and set(pr.h) == {Fraction(3, 8)}
    base_a = np.array([True, False, False, False])
    E = CellSet(r.space, np.repeat(base_a, 8))
    pr = independent_factor_probe(r, E, [1, 4])
    assert pr.e == Fraction(1, 4) and pr.defect == Fraction(3, 4)
    assert pr.per_lag[1]["mean"] == 0 and pr.per_lag[4]["mean"] == Fraction(1, 4)
    doc = pr.to_dict()
    assert doc["e_squared"] == "1/16" and doc["per_lag"]["4"]["defect"] == "3/4"
    with pytest.raises(ValueError):
        independent_factor_probe(r, CellSet(base.space, base_a), [1])


def test_sample_extension_deterministic():
    spec = EnsembleSpec(base="odometer(b=2, l=3)", fiber_size=6, trials=4, master_seed=11)
    a, b = sample_extension(spec, 2), sample_extension(spec, 2)
    assert a == b and not np.array_equal(a.table, sample_extension(spec, 1).table)
    with pytest.raises(ValueError):
        sample_extension(spec, 4)
    ident = EnsembleSpec(base="odometer(b=2, l=3)", fiber_size=6, sampler="near_identity", trials=2)
    r = sample_extension(ident, 0)
    assert r == skew_from_product(r.base, make_identity(6))


def test_near_identity_transpositions():
    spec = EnsembleSpec(base="identity(n=3)", fiber_size=10, sampler="near_identity", transpositions=1, trials=3)
    tab = sample_family(spec, 200, 7)
    moved = (tab != np.arange(10)).sum(axis=1)
    assert set(moved.tolist()) == {2}
    with pytest.raises(ValueError):
        EnsembleSpec(base="identity(n=3)", fiber_size=4, sampler="bogus")


def test_cohomologous_mode():
    spec = EnsembleSpec(base="cyclic_rotation(n=4)", fiber_size=16, trials=2, master_seed=3, fiber="bernoulli_cyclic(k=2, L=4)")
    j = sample_conjugator(spec, 1)
    base = make_cyclic_rotation(4)
    expect = conjugate(skew_from_product(base, make_bernoulli_cyclic(2, 4)), j)
    assert sample_extension(spec, 1) == expect
    with pytest.raises(ValueError):
        EnsembleSpec(base="cyclic_rotation(n=4)", fiber_size=8, fiber="bernoulli_cyclic(k=2, L=4)").fiber_system()


def test_uniform_sampler_smoke():
    spec = EnsembleSpec(base="identity(n=1)", fiber_size=6, trials=1, master_seed=99)
    tab = sample_family(spec, 10_000, 99)
    p = 1 / 6
    sigma = (10_000 * p * (1 - p)) ** 0.5
    for col in range(6):
        counts = np.bincount(tab[:, col], minlength=6)
        assert np.all(np.abs(counts - 10_000 * p) < 5 * sigma)


def test_a_rigidity_on_periodic_base():
    spec = EnsembleSpec(base="cyclic_rotation(n=4)", fiber_size=8, sampler="near_identity", trials=6)
    rep = lift_experiment(spec, "a_rigidity", {"a": 1, "N": 4, "lags": [4, 8]})
    assert rep.observed_fraction == 1 and all(v == 0 for v in rep.values)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "trial,value,witness" and lines[1] == "0,0.0,1"
    s = rep.summary()
    assert s["trials"] == 6 and len(s["trial_seeds"]) == 6 and s["observed_fraction"] == 1.0
    with pytest.raises(ValueError):
        lift_experiment(spec, "nope")


def test_lift_threads_agree():
    spec = EnsembleSpec(base="cyclic_rotation(n=4)", fiber_size=8, trials=8, master_seed=5)
    a = lift_experiment(spec, "weak_mixing_phi", {"N": 4, "lags": [3, 5]}, workers=1)
    b = lift_experiment(spec, "weak_mixing_phi", {"N": 4, "lags": [3, 5]}, workers=4)
    assert a.values == b.values and a.summary_json() == b.summary_json()


def test_hp_blowup_small():
    spec = EnsembleSpec(base="cyclic_rotation(n=4)", fiber_size=256, trials=3, fiber="bernoulli_cyclic(k=2, L=8)")
    rep = lift_experiment(spec, "hp_blowup", {"coord": 0, "j_list": [1, 2], "length": 3})
    assert len(rep.values) == 3 and all(v > 0 for v in rep.values)
    with pytest.raises(ValueError):
        lift_experiment(EnsembleSpec(base="identity(n=2)", fiber_size=4), "hp_blowup", {})


def test_family_profile_blocks():
    fiber = make_bernoulli_cyclic(2, 10)
    m = fiber.n
    rows = np.array([np.arange(m), np.arange(m), fiber.forward, fiber.forward])
    r = SkewSystem(make_identity(4), fiber.space, rows)
    tests = [coordinate_event(fiber, c, 0).indicator() for c in (0, 1)]
    cands = [AdmissibleFunction.identity(), AdmissibleFunction.theta()]
    fits = family_profile(r, np.array([0, 0, 1, 1]), cands, [5], tests)
    assert [f.best for f in fits] == [0, 1]
    assert fits[0].distances[0] == 0 and abs(fits[1].distances[1]) < 1e-12
    assert all(f.margin > 0.1 for f in fits)
    with pytest.raises(ValueError):
        family_profile(random_skew(0), np.zeros(6, int), cands, [1], tests)
