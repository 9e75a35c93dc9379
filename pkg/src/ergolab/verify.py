"""Acceptance checks shared by ``ergolab verify`` and the test suite.

Each suite returns ``Check`` records.  A check passes when its condition holds
and it finishes inside its time budget.
"""

from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import rng
from .asymptotics import (
    AdmissibleFunction,
    asymmetry_gap,
    phi_mix,
    psi_partial,
    psi_rigid,
    triple_correlation,
    triple_targets,
    weak_limit_distance,
)
from .cellsys import (
    CellAutomorphism,
    CellFunction,
    CellSet,
    CellSpace,
    SkewSystem,
    conjugate,
    power_map,
    skew_from_product,
)
from .extlab import (
    Cocycle,
    EnsembleSpec,
    conjugated_trivial_cocycle,
    lift_experiment,
    recurrence_functional,
    rwm_functional,
    rwm_identity_closed_form,
)
from .seqentropy import Partition, fiber_lift, h_j, independence_defect, partition_entropy
from .spectral import (
    CorrelationSequence,
    Trapezoid,
    arc_integrals,
    atomic_spectrum,
    classify_singular,
    correlation_sequence,
)
from .zoo import (
    canonical_family,
    coordinate_family,
    coordinate_labels,
    coordinate_partition,
    make_bernoulli_cyclic,
    make_cyclic_rotation,
    make_identity,
    make_odometer,
    make_random_automorphism,
    window_disjoint,
)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    ok: bool
    detail: str
    seconds: float
    budget: float

    @property
    def passed(self) -> bool:
        return self.ok and self.seconds <= self.budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        timing = f"{self.seconds:.2f}s/{self.budget:g}s"
        return f"[{status}] {self.suite}: {self.name} ({timing}) {self.detail}"


class _Timer:
    def __init__(self, suite: str, budget: float):
        self.suite, self.budget = suite, budget
        self.t0 = time.perf_counter()

    def check(self, name: str, ok: bool, detail: str = "") -> Check:
        return Check(self.suite, name, bool(ok), detail, time.perf_counter() - self.t0, self.budget)


def suite_mixing() -> list[Check]:
    """Mixing functional vanishes on window-disjoint lags of a cyclic Bernoulli model."""
    tm = _Timer("mixing", 1.0)
    t = make_bernoulli_cyclic(2, 10)
    bad = []
    tried = 0
    for coords in ([0], [0, 1]):
        fam = coordinate_family(t, coords)
        for j in range(1, 9):
            if not window_disjoint(coords, j, 10):
                continue
            for N in range(1, min(4, len(fam)) + 1):
                tried += 1
                v = phi_mix(t, fam, N, j)
                if v != 0:
                    bad.append((coords, j, N, v))
    return [tm.check("phi = 0 on window-disjoint lags, N <= 4", not bad and tried > 0, f"{tried} cases, failures {bad[:3]}")]


def suite_rigidity() -> list[Check]:
    """Full-period rigidity and the a = 1 reduction of the partial functional."""
    tm = _Timer("rigidity", 1.0)
    out = []
    vals = {}
    for n in (8, 144, 1024):
        t = make_cyclic_rotation(n)
        fam = canonical_family(t.space, 16)
        vals[n] = psi_rigid(t, fam, 16, n)
    out.append(tm.check("psi(N, n, rotation n) = 0 for n in 8, 144, 1024", all(v == 0 for v in vals.values()), str({n: str(v) for n, v in vals.items()})))
    mismatch = 0
    for trial in range(100):
        seed = rng.derive_seed(99, trial)
        n, N, j = (int(v) for v in rng.random_integers(seed, 3, 64))
        n += 2
        t = make_random_automorphism(n, seed)
        fam = canonical_family(t.space, 16)
        N = N % 16 + 1
        if psi_partial(t, fam, 1, N, j) != psi_rigid(t, fam, N, j):
            mismatch += 1
    out.append(tm.check("psi_a with a = 1 equals psi on 100 random inputs", mismatch == 0, f"{mismatch} mismatches"))
    return out


def suite_weaklimit() -> list[Check]:
    """Weak-limit distance against admissible polynomials."""
    tm = _Timer("weaklimit", 1.0)
    out = []
    t = make_cyclic_rotation(5)
    tests = [a.indicator() for a in canonical_family(t.space, 8).sets]
    d1 = weak_limit_distance(t, 5, AdmissibleFunction.identity(), tests, 8)
    out.append(tm.check("rotation(5), j = 5, identity polynomial: distance 0", d1 == 0.0, f"distance {d1!r}"))
    b = make_bernoulli_cyclic(2, 8)
    tests = [a.indicator() for a in coordinate_family(b, [0, 1]).sets]
    lags = [j for j in range(1, 8) if window_disjoint([0, 1], j, 8)]
    d2 = max(weak_limit_distance(b, j, AdmissibleFunction.theta(), tests, 4) for j in lags)
    out.append(tm.check("bernoulli(2, 8), window-disjoint lags, pure Theta: distance 0", d2 == 0.0, f"lags {lags}, max distance {d2!r}"))
    ident = make_identity(8)
    f = CellSet.from_members(ident.space, range(4)).indicator()
    d3 = weak_limit_distance(ident, 3, AdmissibleFunction.theta(), [f], 1)
    out.append(tm.check("identity, pure Theta, nonconstant test: distance > 0.01", d3 > 0.01, f"distance {d3!r}"))
    return out


SPECTRAL_P = (4, 8, 16, 32, 64)


def suite_spectral() -> list[Check]:
    """Singularity classifier on Dirac, Lebesgue and mixed inputs, plus the atomic cross-check."""
    tm = _Timer("spectral", 30.0)
    out = []
    s_max = 64 * max(SPECTRAL_P) * 8
    dirac = CorrelationSequence.dirac(0, s_max)
    v = classify_singular(dirac, [2, 4, 8], SPECTRAL_P)
    ok = v.verdict == "singular_witnessed" and all(P <= 64 for _, P in v.witness)
    out.append(tm.check("Dirac at 0: singular_witnessed with P <= 64 for N in 2, 4, 8", ok, f"{v.verdict} {v.witness}"))
    leb = CorrelationSequence.lebesgue()
    v = classify_singular(leb, [2], list(range(3, 1025)))
    ok = v.verdict == "not_singular_at_horizon" and v.records[0].status == "failed"
    out.append(tm.check("Lebesgue: not_singular_at_horizon at N = 2, every P <= 1024", ok, v.verdict))
    mix = CorrelationSequence.mixture([(0.5, dirac), (0.5, leb)])
    v = classify_singular(mix, [2, 4, 8], SPECTRAL_P)
    out.append(tm.check("half Dirac, half Lebesgue: not_singular_at_horizon", v.verdict == "not_singular_at_horizon", f"{v.verdict} P <= {max(SPECTRAL_P)}"))
    worst, bad = 0.0, 0
    P, d = 16, 2048
    for trial in range(100):
        seed = rng.derive_seed(4, trial)
        n = int(rng.random_integers(seed, 1, 511)[0]) + 2
        t = make_random_automorphism(n, seed)
        vals = rng.random_integers(seed, n, 1 << 20, start=n + 1).astype(float) - (1 << 19)
        f = CellFunction(t.space, vals).normalized()
        corr = correlation_sequence(t, f, d)
        atoms = atomic_spectrum(t, f)
        res = arc_integrals(corr, P, d)
        exact = np.array([atoms.integrate(Trapezoid(k, P)) for k in range(P)])
        err = float(np.abs(exact - res.values).max())
        worst = max(worst, err / res.bound)
        bad += err > res.bound
    out.append(tm.check("atomic and Fejer integrals agree within the certified bound (100 systems)", bad == 0, f"worst error/bound {worst:.3f}"))
    return out


def suite_entropy() -> list[Check]:
    """Exact sequence entropy on the Bernoulli model, identity case and conjugation identity."""
    tm = _Timer("entropy", 60.0)
    out = []
    t = make_bernoulli_cyclic(2, 16)
    xi = coordinate_partition(t, 0)
    vals = {j: h_j(t, xi, [n * j for n in range(1, 6)]) for j in (1, 2, 3)}
    ok = all(abs(v - math.log(2)) <= 1e-12 for v in vals.values())
    out.append(tm.check("h_j = ln 2 for progressions j..5j, j in 1, 2, 3", ok, str({j: repr(v) for j, v in vals.items()})))
    ident = make_identity(64)
    eta = Partition(ident.space, rng.random_integers(5, 64, 3))
    H = partition_entropy(eta)
    ok = all(h_j(ident, eta, range(1, L + 1)) == H / L for L in (1, 2, 5, 16))
    out.append(tm.check("identity: h_j = H(xi)/|P_j| exactly", ok, f"H = {H!r}"))
    base = make_odometer(2, 4)
    fiber = make_bernoulli_cyclic(2, 12)
    r = skew_from_product(base, fiber)
    xi = fiber_lift(r, coordinate_labels(fiber, 0))
    worst = 0.0
    for trial in range(20):
        seed = rng.derive_seed(6, trial)
        seeds = [rng.derive_seed(seed, x) for x in range(base.n)]
        jq = SkewSystem(make_identity(base.n), fiber.space, rng.random_permutations(seeds, fiber.n))
        rq = conjugate(r, jq).product
        lags = [3 * n for n in range(1, 5)]
        a = h_j(rq, xi, lags)
        b = h_j(r.product, xi.image(jq.product), lags)
        worst = max(worst, abs(a - b))
    out.append(tm.check("h_j(R_q, xi) = h_j(R, J_q xi) on 20 random J_q", worst <= 1e-12, f"max gap {worst!r}"))
    return out


def _eta(t: CellAutomorphism, M: int) -> Partition:
    """Join of ``T^i xi`` for ``|i| <= M`` with ``xi`` the coordinate-0 partition."""
    labels = coordinate_labels(t, 0)
    code = np.zeros(t.n, dtype=np.int64)
    for i in range(-M, M + 1):
        code = code * 2 + labels[power_map(t.forward, -i)]
    return Partition(t.space, code)


def defect_cases(L: int = 16):
    """``(M, j, n_max)`` cases on ``bernoulli_cyclic(2, L)``, split by expected defect.

    Zero cases need ``j > 2M`` and pairwise disjoint shifted windows mod ``L``;
    positive cases have ``j <= 2M`` and at least two lags.
    """
    zero, positive = [], []
    for M in (1, 2):
        width = 2 * M + 1
        for n_max in range(2, 5):
            for j in range(1, L):
                if j > 2 * M and (n_max - 1) * j + width <= L:
                    zero.append((M, j, n_max))
                elif j <= 2 * M:
                    positive.append((M, j, n_max))
    return zero, positive


def suite_defect() -> list[Check]:
    """Independence defect of spaced shifts and the random-conjugation entropy ensemble."""
    out = []
    tm = _Timer("defect", 60.0)
    t = make_bernoulli_cyclic(2, 16)
    zero, positive = defect_cases()
    etas = {M: _eta(t, M) for M in (1, 2)}
    bad_zero = [c for c in zero if independence_defect(t, etas[c[0]], [n * c[1] for n in range(1, c[2] + 1)]) != 0.0]
    out.append(tm.check("defect = 0 exactly for j > 2M (disjoint windows)", not bad_zero, f"{len(zero)} cases, failures {bad_zero[:3]}"))
    bad_pos = [c for c in positive if not independence_defect(t, etas[c[0]], [n * c[1] for n in range(1, c[2] + 1)]) > 0]
    out.append(tm.check("defect > 0 for j <= 2M", not bad_pos, f"{len(positive)} cases, failures {bad_pos[:3]}"))
    tm = _Timer("defect", 300.0)
    spec = EnsembleSpec(
        base="odometer(b=2, l=8)", fiber_size=4096, trials=200, master_seed=20240601, fiber="bernoulli_cyclic(k=2, L=12)"
    )
    rep = lift_experiment(spec, "hp_blowup", {"coord": 0, "j_list": [3, 4], "length": 4})
    frac = rep.observed_fraction
    out.append(tm.check("hp_blowup: observed fraction >= 0.95 with h_j > H(xi)/2 at j = 3, 4", frac >= 0.95, f"observed fraction {frac}"))
    return out


def _random_skew(seed: int, nb: int, m: int) -> SkewSystem:
    base = make_random_automorphism(nb, seed)
    seeds = [rng.derive_seed(seed, 1, x) for x in range(nb)]
    return SkewSystem(base, CellSpace(m), rng.random_permutations(seeds, m))


def suite_cocycle() -> list[Check]:
    """Cocycle law, conjugated trivial cocycles and the recurrence functional of ``S x Id``."""
    tm = _Timer("cocycle", 30.0)
    out = []
    bad = 0
    for trial in range(10):
        seed = rng.derive_seed(7, trial)
        nb = int(rng.random_integers(seed, 1, 63)[0]) + 2
        m = max(2, (1 << 12) // nb // (1 + trial % 3))
        skew = _random_skew(seed, nb, m)
        coc = Cocycle(skew)
        for n in range(33):
            pos = power_map(skew.base.forward, n)
            tn = coc.table(n)
            for k in range(33):
                lhs = coc.table(n + k)
                rhs = coc.table(k)[pos[:, None], tn]
                bad += not np.array_equal(lhs, rhs)
    out.append(tm.check("C(x, n+m) = C(S^n x, m) C(x, n), all x, n, m <= 32, 10 systems", bad == 0, f"{bad} failures"))
    bad = 0
    for trial in range(10):
        seed = rng.derive_seed(8, trial)
        nb, m = 32, 16
        base = make_random_automorphism(nb, seed)
        seeds = [rng.derive_seed(seed, 2, x) for x in range(nb)]
        j = SkewSystem(make_identity(nb), CellSpace(m), rng.random_permutations(seeds, m))
        r = conjugate(skew_from_product(base, make_identity(m)), j)
        coc = Cocycle(r)
        for p in range(33):
            for x in range(nb):
                direct = conjugated_trivial_cocycle(j, base, x, p)
                bad += not np.array_equal(coc.table(p)[x], direct.forward)
    out.append(tm.check("C(x, p) = J_{S^p x}^-1 J_x for conjugated S x Id, 10 random J", bad == 0, f"{bad} failures"))
    base = make_random_automorphism(48, 11)
    r = skew_from_product(base, make_identity(8))
    fam = canonical_family(CellSpace(8), 8)
    A = CellSet.from_members(base.space, range(0, 48, 2))
    lags = [1, 2, 3, 5]
    got = recurrence_functional(r, A, lags, 4, fam)
    want = Fraction(1)
    for p in lags:
        want *= Fraction(int((A.mask & A.mask[power_map(base.forward, -p)]).sum()), base.n)
    out.append(tm.check("recurrence functional of S x Id = prod mu(A & S^p A)", got == want, f"{got} vs {want}"))
    return out


def suite_rwm() -> list[Check]:
    """Closed form for ``S x Id`` and the random-extension ensemble against that control."""
    tm = _Timer("rwm", 120.0)
    out = []
    base = make_cyclic_rotation(8)
    fam = canonical_family(CellSpace(8), 4)
    control = rwm_identity_closed_form(fam, 4)
    r = skew_from_product(base, make_identity(8))
    vals = {j: rwm_functional(r, fam, 4, j) for j in (1, 7, 64)}
    out.append(tm.check("S x Id: enumeration equals the closed form at j = 1, 7, 64", all(v == control for v in vals.values()), f"control {control}"))
    spec = EnsembleSpec(base="cyclic_rotation(n=8)", fiber_size=8, trials=100, master_seed=20240602)
    rep = lift_experiment(spec, "rwm", {"N": 4, "j": 64, "fiber_i_max": 4})
    frac = rep.observed_fraction
    out.append(tm.check("random extensions below the S x Id control at j = 64 in >= 90% of 100 trials", frac >= 0.9, f"observed fraction {frac}"))
    return out


def suite_triple() -> list[Check]:
    """Triple correlations on the identity and Bernoulli models, and the target arithmetic."""
    tm = _Timer("triple", 1.0)
    out = []
    ident = make_identity(16)
    a = CellSet.from_members(ident.space, range(5))
    vals = [triple_correlation(ident, a, m, d) for m in (1, 2, 3) for d in ("forward", "backward")]
    out.append(tm.check("identity: both directions equal mu(A)", all(v == a.measure for v in vals), f"mu(A) = {a.measure}"))
    b = make_bernoulli_cyclic(2, 12)
    A = CellSet(b.space, coordinate_labels(b, 0) == 0)
    fw, bw = triple_correlation(b, A, 2, "forward"), triple_correlation(b, A, 2, "backward")
    out.append(tm.check("bernoulli(2, 12), A = {w_0 = 0}, m = 2: both 1/8", fw == bw == Fraction(1, 8), f"{fw}, {bw}"))
    gaps = [asymmetry_gap(ident, a, m) for m in (1, 2, 5)]
    out.append(tm.check("asymmetry gap of the identity is 0", all(g == 0 for g in gaps), str([str(g) for g in gaps])))
    fwd, bwd = triple_targets(Fraction(1, 4))
    ok = fwd == Fraction(11, 128) and bwd == Fraction(1, 16)
    out.append(tm.check("targets at mu = 1/4: (mu + mu^2 + 2 mu^3)/4 = 11/128, mu^2 = 1/16", ok, f"{fwd}, {bwd}"))
    return out


DETERMINISM_CONFIGS = {
    "scan": {
        "task": "scan",
        "system": "bernoulli_cyclic(k=2, L=10)",
        "family": {"kind": "coordinate", "coords": [0, 1]},
        "functional": "phi",
        "N": 4,
        "j_range": {"start": 0, "stop": 40},
    },
    "entropy": {
        "task": "entropy",
        "system": "bernoulli_cyclic(k=2, L=16)",
        "partition": {"kind": "coordinate", "coord": 0},
        "sequence": {"kind": "progression", "L": 5},
        "j_range": [1, 2, 3, 4],
    },
    "ensemble": {
        "task": "ensemble",
        "ensemble": {"base": "cyclic_rotation(n=8)", "fiber_size": 8, "trials": 24, "master_seed": 5},
        "selector": "rwm",
        "params": {"N": 4, "j": 64, "fiber_i_max": 4},
    },
    "spectral": {
        "task": "spectral",
        "system": "cyclic_rotation(n=4)",
        "vector": {"kind": "indicator", "cells": [0]},
        "s_max": 4096,
        "N_schedule": [2, 4, 8],
        "P_schedule": [4, 8, 16, 32, 64],
    },
}


def suite_determinism() -> list[Check]:
    """Byte-identical data outputs across reruns and thread counts."""
    from .runner import run_config

    tm = _Timer("determinism", 60.0)
    diffs = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for name, body in DETERMINISM_CONFIGS.items():
            seen = set()
            for threads in (1, 4, 1):
                doc = dict(body, schema_version=1, output={"dir": f"out{threads}-{len(seen)}", "name": name})
                cfg = tmp / f"{name}.json"
                cfg.write_text(json.dumps(doc))
                paths = run_config(cfg, threads)
                seen.add((paths[".csv"].read_bytes(), paths[".summary.json"].read_bytes(), paths[".dat"].read_bytes()))
            if len(seen) != 1:
                diffs.append(name)
    return [tm.check("CSV, summary and plot files identical across reruns at 1 and 4 threads", not diffs, f"configs {list(DETERMINISM_CONFIGS)}, differing {diffs}")]


SUITES = {
    "mixing": (suite_mixing, "mixing functional exactness on the Bernoulli model"),
    "rigidity": (suite_rigidity, "rotation rigidity witnesses and psi_a at a = 1"),
    "weaklimit": (suite_weaklimit, "weak-limit distance to admissible polynomials"),
    "spectral": (suite_spectral, "Dirac, Lebesgue and mixture classification, atomic cross-check"),
    "entropy": (suite_entropy, "Bernoulli h_j exactness and the conjugation identity"),
    "defect": (suite_defect, "independence defect and the random-conjugation entropy ensemble"),
    "cocycle": (suite_cocycle, "cocycle laws and recurrence of S x Id"),
    "rwm": (suite_rwm, "relative weak mixing functional against the S x Id control"),
    "triple": (suite_triple, "triple correlations and target arithmetic"),
    "determinism": (suite_determinism, "byte-identical outputs across threads"),
}


def run_suites(names) -> list[Check]:
    checks = []
    for name in names:
        checks += SUITES[name][0]()
    return checks
