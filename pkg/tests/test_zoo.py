import math
from fractions import Fraction

import numpy as np
import pytest

from ergolab import zoo
from ergolab.asymptotics import psi_rigid
from ergolab.cellsys import CellCapError, CellSet, CellSpace, apply_set, compose, halmos_distance, power, set_cell_cap
from ergolab.seqentropy import partition_entropy, refine


def test_parse_and_format_descriptor():
    d = zoo.parse_descriptor(" odometer( b = 2, l=8 ) ")
    assert d.kind == "odometer" and d.param_dict == {"b": 2, "l": 8}
    assert str(d) == "odometer(b=2, l=8)"
    assert zoo.parse_descriptor(str(d)) == d
    assert d.cell_count() == 256


@pytest.mark.parametrize(
    "text",
    ["odometer(b=2)", "nosuch(n=3)", "identity(n=x)", "identity(n)", "identity(n=3, m=2)", "(n=3)"],
)
def test_bad_descriptors(text):
    with pytest.raises(zoo.DescriptorError):
        zoo.parse_descriptor(text)


def test_catalog_lists_every_kind():
    cat = zoo.catalog()
    assert {s["kind"] for s in cat["systems"]} == set(zoo.KINDS)
    assert cat["cell_cap"] == 1 << 24


def test_identity_examples():
    assert zoo.make_identity(1).n == 1
    t = zoo.make_identity(8)
    a = CellSet.from_members(t.space, [1, 5])
    assert apply_set(t, a) == a
    fam = zoo.canonical_family(CellSpace(4), 4)
    assert halmos_distance(zoo.make_identity(4), zoo.make_identity(4), fam).value == 0


def brute_psi(fwd, sets, N, j):
    n = len(fwd)
    m = list(range(n))
    for _ in range(j):
        m = [fwd[c] for c in m]
    best = Fraction(-1)
    for a in sets[:N]:
        image = {m[c] for c in a}
        best = max(best, Fraction(len(a) - len(a & image), n))
    return best


def test_rotation_examples():
    for n in (1, 7, 144):
        assert power(zoo.make_cyclic_rotation(n), n).is_identity()
    t = zoo.make_cyclic_rotation(144)
    fam = zoo.canonical_family(t.space, 16)
    assert psi_rigid(t, fam, 16, 144) == 0
    sets = [set(s.members.tolist()) for s in fam.sets]
    v = psi_rigid(t, fam, 16, 89)
    assert v == brute_psi(t.forward.tolist(), sets, 16, 89)
    assert 0 < v < 1


def test_rotation_rigidity_iff_period():
    t = zoo.make_cyclic_rotation(12)
    fam = zoo.canonical_family(t.space, 30)
    for j in range(0, 40):
        assert (psi_rigid(t, fam, 30, j) == 0) == (j % 12 == 0)


def test_fibonacci_schedule():
    assert zoo.fibonacci_schedule(8) == [1, 2, 3, 5, 8, 13, 21, 34]
    assert zoo.fibonacci_schedule(3, start=100) == [144, 233, 377]


def test_odometer_examples():
    assert zoo.make_odometer(2, 1) == zoo.make_cyclic_rotation(2)
    for l in (1, 3, 6):
        t = zoo.make_odometer(2, l)
        assert power(t, 2**l).is_identity()
        assert t.order() == 2**l


def odometer_step(digits, b):
    digits = list(digits)
    for i in range(len(digits)):
        digits[i] += 1
        if digits[i] < b:
            break
        digits[i] = 0
    return digits


def test_odometer_matches_digit_arithmetic():
    b, l = 3, 4
    t = zoo.make_odometer(b, l)
    for c in range(b**l):
        x = [(c // b ** (l - 1 - i)) % b for i in range(l)]  # x_0 most significant
        y = odometer_step(x, b)
        assert t(c) == sum(d * b ** (l - 1 - i) for i, d in enumerate(y))


def test_odometer_half_period_psi():
    l = 6
    t = zoo.make_odometer(2, l)
    fam = zoo.canonical_family(t.space, 2 ** (l + 1))
    sets = [set(s.members.tolist()) for s in fam.sets]
    for N in (1, 3, 16, 64, 128):
        assert psi_rigid(t, fam, N, 2 ** (l - 1)) == brute_psi(t.forward.tolist(), sets, N, 2 ** (l - 1))
    # the dyadic blocks of size >= 2 are cylinders fixed by the half period
    assert psi_rigid(t, fam, 63, 2 ** (l - 1)) == 0


def test_bernoulli_examples():
    t = zoo.make_bernoulli_cyclic(2, 8)
    a = zoo.coordinate_event(t, 0, 0)
    assert a.measure == Fraction(1, 2)
    assert (a & apply_set(power(t, 3), a)).measure == Fraction(1, 4)
    assert (a & apply_set(power(t, 8), a)).measure == a.measure
    for L in (2, 5, 9):
        assert zoo.coordinate_event(zoo.make_bernoulli_cyclic(2, L), L - 1, 0).measure == Fraction(1, 2)


def test_bernoulli_shift_moves_coordinates():
    k, L = 3, 5
    t = zoo.make_bernoulli_cyclic(k, L)
    for c in range(k**L):
        w = [(c // k**i) % k for i in range(L)]
        v = t(c)
        wv = [(v // k**i) % k for i in range(L)]
        assert wv == w[1:] + w[:1]


def test_bernoulli_exactness_horizon():
    k, L = 2, 7
    t = zoo.make_bernoulli_cyclic(k, L)
    for c1 in range(L):
        for c2 in range(L):
            for j in range(1, L):
                if not zoo.window_disjoint([c2], j, L) or (c2 - j) % L == c1:
                    continue
                a = zoo.coordinate_event(t, c1, 0)
                b = zoo.coordinate_event(t, c2, 1)
                assert (a & apply_set(power(t, j), b)).measure == a.measure * b.measure


def test_cap_exceeded():
    set_cell_cap(1000)
    try:
        with pytest.raises(CellCapError):
            zoo.make_bernoulli_cyclic(2, 10)
        with pytest.raises(CellCapError):
            zoo.build("odometer(b=10, l=4)")
    finally:
        set_cell_cap(None)


def test_random_automorphism_examples():
    a, b = zoo.make_random_automorphism(40, 9), zoo.make_random_automorphism(40, 9)
    assert np.array_equal(a.forward, b.forward)
    assert zoo.make_random_automorphism(6, 1).forward.tolist() == [2, 0, 1, 4, 5, 3]
    assert compose(a, a.inv()).is_identity()


def test_canonical_family_examples():
    sp = CellSpace(8)
    fam = zoo.canonical_family(sp, 16)
    assert fam[0].count == 8
    assert fam[1].members.tolist() == [0, 1, 2, 3]
    assert fam[2].members.tolist() == [4, 5, 6, 7]
    singles = [s for s in fam.sets if s.count == 1]
    assert sorted(int(s.members[0]) for s in singles) == list(range(8))
    # off powers of two the finest complete level sits below 4n
    fam7 = zoo.canonical_family(CellSpace(7), 4 * 7)
    got = {int(s.members[0]) for s in fam7.sets if s.count == 1}
    assert got == set(range(7))


def test_coordinate_partition_examples():
    t = zoo.make_bernoulli_cyclic(2, 6)
    xi = zoo.coordinate_partition(t, 2)
    assert [m for m in xi.masses()] == [Fraction(1, 2)] * 2
    assert math.isclose(partition_entropy(xi), math.log(2))
    t3 = zoo.make_bernoulli_cyclic(3, 4)
    assert math.isclose(partition_entropy(zoo.coordinate_partition(t3, 1)), math.log(3))
    joint = zoo.coordinate_partition(t, 0).join(zoo.coordinate_partition(t, 1))
    assert joint.class_count == 4
    with pytest.raises(zoo.DescriptorError):
        zoo.coordinate_partition(zoo.make_identity(4), 0)
    with pytest.raises(ValueError):
        zoo.coordinate_partition(t, 6)
    assert refine(t, xi, [0]) == xi


def test_partition_library():
    t = zoo.make_bernoulli_cyclic(2, 6)
    lib = zoo.partition_library(t, seed=3)
    assert "coord0" in lib and "blocks2" in lib and "random2_seed3" in lib


def test_windows():
    assert zoo.shifted_window([0, 1], 3, 10) == {7, 8}
    assert zoo.window_disjoint([0, 1], 2, 10)
    assert not zoo.window_disjoint([0, 1], 1, 10)
    assert zoo.windows_pairwise_disjoint([[0, 1], [2], [5, 6]])
    assert not zoo.windows_pairwise_disjoint([[0, 1], [1]])
