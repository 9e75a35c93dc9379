"""Cocycles, extension diagnostics and seeded ensembles of random extensions.

Ensemble reports speak of the *observed fraction at the horizon*; nothing here
samples a Baire-generic set.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import rng
from .asymptotics import AdmissibleFunction, phi_mix, psi_partial, weak_limit_distance
from .cellsys import (
    CellAutomorphism,
    CellFunction,
    CellSet,
    CellSpace,
    DenseFamily,
    SkewSystem,
    conjugate,
    halmos_to_identity_counts,
    power_map,
    skew_from_product,
)
from .seqentropy import entropy_from_counts
from .zoo import SystemDescriptor, build, canonical_family, coordinate_labels


class Cocycle:
    """``C(x, n) = R_{S^{n-1} x} ... R_{S x} R_x`` with memoized tables.

    ``table(n)[x]`` is the forward array of ``C(x, n)``.  Tables are kept for
    every ``n`` reached until ``budget_cells`` entries are cached; caching only
    affects speed.
    """

    def __init__(self, skew: SkewSystem, budget_cells: int = 1 << 24):
        self.skew = skew
        self.budget = budget_cells
        ident = np.broadcast_to(np.arange(skew.n_fib), (skew.n_base, skew.n_fib))
        self._tables = {0: ident}
        self._orbit = {0: np.arange(skew.n_base)}
        self._last = 0

    def _orbit_point(self, n: int) -> np.ndarray:
        if n not in self._orbit:
            self._orbit[n] = power_map(self.skew.base.forward, n)
        return self._orbit[n]

    def table(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("cocycle length must be non-negative")
        if n in self._tables:
            return self._tables[n]
        start = max(k for k in self._tables if k <= n)
        cur = self._tables[start]
        pos = power_map(self.skew.base.forward, start)
        fwd = self.skew.base.forward
        cached = sum(t.size for t in self._tables.values())
        for k in range(start, n):
            # C(x, k+1) = R_{S^k x} o C(x, k)
            cur = self.skew.table[pos[:, None], cur]
            pos = fwd[pos]
            if cached + cur.size <= self.budget:
                self._tables[k + 1] = cur
                cached += cur.size
        return cur

    def __call__(self, x: int, n: int) -> CellAutomorphism:
        return CellAutomorphism(self.skew.fiber_space, self.table(n)[x])


def cocycle(skew: SkewSystem, x: int, n: int) -> CellAutomorphism:
    """Composed fiber map along the base orbit of ``x``; ``n = 0`` gives the identity."""
    if n < 0:
        raise ValueError("n must be non-negative")
    m = skew.n_fib
    out = np.arange(m)
    pos = int(x)
    for _ in range(n):
        out = skew.table[pos][out]
        pos = int(skew.base.forward[pos])
    return CellAutomorphism(skew.fiber_space, out)


def conjugated_trivial_cocycle(j: SkewSystem, base: CellAutomorphism, x: int, p: int) -> CellAutomorphism:
    """``J_{S^p x}^{-1} J_x``, the cocycle of ``J^{-1} (S x Id) J`` computed directly."""
    y = int(power_map(base.forward, p)[x])
    jinv = j.inverse_table()
    return CellAutomorphism(j.fiber_space, jinv[y][j.table[x]])


def rwm_functional(skew: SkewSystem, fam: DenseFamily, N: int, j: int, cocycle_cache: Cocycle | None = None) -> Fraction:
    """``max_{i,k <= N} avg_x (1/j) sum_{n=1..j} (mu(C(x,n) A_i & A_k) - mu(A_i) mu(A_k))^2`` (exact)."""
    if fam.space != skew.fiber_space:
        raise ValueError("family must live on the fiber space")
    if not 1 <= N <= len(fam):
        raise ValueError(f"N={N} out of range for a family of {len(fam)} sets")
    if j < 1:
        raise ValueError("j must be at least 1")
    coc = cocycle_cache or Cocycle(skew)
    m = skew.n_fib
    M = fam.masks[:N].astype(np.int64)
    a = fam.counts[:N]
    prod = np.outer(a, a)
    big = (m * m) ** 2 * skew.n_base * j >= 1 << 62
    acc = np.zeros((N, N), dtype=object if big else np.int64)
    for n in range(1, j + 1):
        tab = coc.table(n)
        # |C A_i & A_k| = #{y in A_i : C y in A_k}
        hits = np.einsum("iy,kxy->ikx", M, M[:, tab])
        dev = m * hits - prod[:, :, None]
        if big:
            dev = dev.astype(object)
        acc = acc + (dev * dev).sum(axis=2)
    den = skew.n_base * j * m**4
    best = max(int(v) for v in np.asarray(acc).ravel())
    return Fraction(best, den)


def rwm_identity_closed_form(fam: DenseFamily, N: int) -> Fraction:
    """Value of the functional for ``S x Id``: ``max_{i,k} (mu(A_i & A_k) - mu(A_i) mu(A_k))^2``."""
    M = fam.masks[:N].astype(np.int64)
    n = fam.space.n
    inter = M @ M.T
    a = fam.counts[:N]
    dev = n * inter - np.outer(a, a)
    return Fraction(int((dev * dev).max()), n**4)


def recurrence_functional(
    skew: SkewSystem,
    A: CellSet,
    lags: Sequence[int],
    N: int,
    fiber_fam: DenseFamily,
    cocycle_cache: Cocycle | None = None,
) -> Fraction:
    """``prod_{p} mu({x in A & S^p A : rho(C(x, p), Id) < 1/N})`` with exact comparisons."""
    if A.space != skew.base.space:
        raise ValueError("A must be a base set")
    if A.count == 0:
        raise ValueError("A must have positive measure")
    if fiber_fam.space != skew.fiber_space:
        raise ValueError("fiber family must live on the fiber space")
    coc = cocycle_cache or Cocycle(skew)
    den = skew.n_fib << len(fiber_fam)
    out = Fraction(1)
    for p in lags:
        # S^p A has mask A[S^{-p} x]
        region = A.mask & A.mask[power_map(skew.base.forward, -int(p))]
        num = halmos_to_identity_counts(coc.table(int(p)), fiber_fam)
        close = np.array([int(v) * N < den for v in num], dtype=bool)
        out *= Fraction(int((region & close).sum()), skew.n_base)
        if out == 0:
            break
    return out


@dataclass(frozen=True)
class FactorProbe:
    e: Fraction
    h: tuple
    defect: Fraction
    per_lag: dict

    def to_dict(self) -> dict:
        return {
            "e": str(self.e),
            "e_squared": str(self.e**2),
            "h": [str(v) for v in self.h],
            "defect": str(self.defect),
            "per_lag": {
                str(p): {"mean": str(v["mean"]), "defect": str(v["defect"]), "h": [str(x) for x in v["h"]]}
                for p, v in self.per_lag.items()
            },
        }


def independent_factor_probe(skew: SkewSystem, E: CellSet, lags: Sequence[int]) -> FactorProbe:
    """Fiber-slice masses of ``E`` and of ``E & R^p E`` with their constancy defects."""
    if E.space != skew.space:
        raise ValueError("E must live on the product space")
    nb, m = skew.n_base, skew.n_fib
    slices = E.mask.reshape(nb, m).sum(axis=1)
    e = E.measure
    h = tuple(Fraction(int(c), m) for c in slices)
    defect = max(abs(v - e) for v in h)
    per_lag = {}
    for p in lags:
        moved = E.mask[power_map(skew.product.forward, -int(p))]
        both = (E.mask & moved).reshape(nb, m).sum(axis=1)
        hp = tuple(Fraction(int(c), m) for c in both)
        mean = Fraction(int(both.sum()), nb * m)
        per_lag[int(p)] = {"h": hp, "mean": mean, "defect": max(abs(v - mean) for v in hp)}
    return FactorProbe(e, h, defect, per_lag)


SAMPLERS = ("uniform_permutations", "near_identity")


@dataclass(frozen=True)
class EnsembleSpec:
    """Seeded ensemble of extensions of a fixed base.

    With ``fiber`` unset each trial draws the fiber family ``R_x`` directly.
    With ``fiber`` set to a descriptor ``T``, each trial draws ``J`` over the
    identity and returns ``J^{-1} (S x T) J``.
    """

    base: str
    fiber_size: int
    sampler: str = "uniform_permutations"
    transpositions: int = 0
    trials: int = 100
    master_seed: int = 0
    fiber: str | None = None

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.transpositions < 0:
            raise ValueError("transpositions must be non-negative")

    def trial_seed(self, trial: int) -> int:
        return rng.derive_seed(self.master_seed, trial)

    def base_system(self) -> CellAutomorphism:
        return build(self.base)

    def fiber_system(self) -> CellAutomorphism | None:
        if self.fiber is None:
            return None
        t = build(self.fiber)
        if t.n != self.fiber_size:
            raise ValueError(f"fiber system has {t.n} cells, fiber_size is {self.fiber_size}")
        return t


def sample_family(spec: EnsembleSpec, rows: int, seed: int) -> np.ndarray:
    """``rows`` fiber maps on ``spec.fiber_size`` cells from the spec's sampler."""
    m = spec.fiber_size
    seeds = [rng.derive_seed(seed, x) for x in range(rows)]
    if spec.sampler == "uniform_permutations":
        return rng.random_permutations(seeds, m)
    table = np.tile(np.arange(m, dtype=np.int64), (rows, 1))
    if spec.transpositions == 0 or m < 2:
        return table
    idx = np.arange(rows)
    picks = np.stack([rng.random_integers(s, 2 * spec.transpositions, m * (m - 1)) for s in seeds])
    for t in range(spec.transpositions):
        # pair (a, b) with a != b, uniform over ordered pairs
        code = picks[:, 2 * t]
        a = code // (m - 1)
        b = code % (m - 1)
        b = b + (b >= a)
        held = table[idx, a].copy()
        table[idx, a] = table[idx, b]
        table[idx, b] = held
    return table


def sample_extension(spec: EnsembleSpec, trial: int) -> SkewSystem:
    """Deterministic extension for ``trial`` from the derived per-trial seed."""
    if not 0 <= trial < spec.trials:
        raise ValueError(f"trial {trial} outside [0, {spec.trials})")
    base = spec.base_system()
    seed = spec.trial_seed(trial)
    table = sample_family(spec, base.n, seed)
    fiber_space = CellSpace(spec.fiber_size)
    t = spec.fiber_system()
    if t is None:
        return SkewSystem(base, fiber_space, table)
    j = SkewSystem(build(SystemDescriptor.of("identity", n=base.n)), fiber_space, table)
    return conjugate(skew_from_product(base, t), j)


def sample_conjugator(spec: EnsembleSpec, trial: int) -> SkewSystem:
    """The ``J`` over the identity used by ``sample_extension`` when ``fiber`` is set."""
    base = spec.base_system()
    table = sample_family(spec, base.n, spec.trial_seed(trial))
    return SkewSystem(build(SystemDescriptor.of("identity", n=base.n)), CellSpace(spec.fiber_size), table)


SELECTORS = ("a_rigidity", "weak_mixing_phi", "rwm", "hp_blowup")


@dataclass(frozen=True)
class EnsembleReport:
    selector: str
    values: tuple
    witnesses: tuple
    threshold: str
    params: dict
    spec: EnsembleSpec
    extra: dict = field(default_factory=dict)

    @property
    def observed_fraction(self) -> float:
        return sum(self.witnesses) / len(self.witnesses)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "value", "witness"])
        for i, (v, ok) in enumerate(zip(self.values, self.witnesses)):
            w.writerow([i, _fmt(v), int(ok)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "selector": self.selector,
            "trials": len(self.values),
            "observed_fraction": self.observed_fraction,
            "witness_count": int(sum(self.witnesses)),
            "threshold": self.threshold,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "spec": {k: _jsonable(v) for k, v in self.spec.__dict__.items()},
            "trial_seeds": [f"{self.spec.trial_seed(i):#018x}" for i in range(len(self.values))],
            "extra": {k: _jsonable(v) for k, v in self.extra.items()},
            "note": "observed fraction of seeded trials meeting the witness condition at the scanned horizon",
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return f"{float(v)!r}"
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _product_family(spec_params: dict, space: CellSpace) -> DenseFamily:
    return canonical_family(space, int(spec_params.get("i_max", 16)))


def lift_experiment(spec: EnsembleSpec, selector: str, params: dict | None = None, workers: int = 1) -> EnsembleReport:
    """Evaluate a lifting functional on every trial of the ensemble.

    Selectors and witness conditions:

    ``a_rigidity``  ``min_lag psi_a(N, lag, R) < 1/N`` (params ``a``, ``N``, ``lags``, ``i_max``)
    ``weak_mixing_phi``  ``min_lag phi(N, lag, R) < 1/N`` (params ``N``, ``lags``, ``i_max``)
    ``rwm``  value strictly below the ``S x Id`` control (params ``N``, ``j``, ``fiber_i_max``)
    ``hp_blowup``  ``h_j(R, xi) > H(xi)/2`` at every scanned ``j`` (params ``coord``, ``j_list``, ``length``)
    """
    params = dict(params or {})
    if selector not in SELECTORS:
        raise ValueError(f"selector must be one of {SELECTORS}")
    extra: dict = {}
    if selector == "a_rigidity":
        a = Fraction(str(params.get("a", 1)))
        N = int(params.get("N", 4))
        lags = [int(p) for p in params["lags"]]

        def evaluate(trial):
            r = sample_extension(spec, trial)
            fam = _product_family(params, r.space)
            v = min(psi_partial(r.product, fam, a, N, p) for p in lags)
            return v, v < Fraction(1, N)

        threshold = f"psi_a < 1/{N}"
    elif selector == "weak_mixing_phi":
        N = int(params.get("N", 4))
        lags = [int(p) for p in params["lags"]]

        def evaluate(trial):
            r = sample_extension(spec, trial)
            fam = _product_family(params, r.space)
            v = min(phi_mix(r.product, fam, N, p) for p in lags)
            return v, v < Fraction(1, N)

        threshold = f"phi < 1/{N}"
    elif selector == "rwm":
        N = int(params.get("N", 4))
        j = int(params.get("j", 64))
        fam = canonical_family(CellSpace(spec.fiber_size), int(params.get("fiber_i_max", N)))
        control = rwm_identity_closed_form(fam, N)
        extra["control"] = control

        def evaluate(trial):
            r = sample_extension(spec, trial)
            v = rwm_functional(r, fam, N, j)
            return v, v < control

        threshold = f"rwm < S x Id control {control}"
    else:
        evaluate, threshold = _hp_blowup_evaluator(spec, params, extra)
    trials = range(spec.trials)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(evaluate, trials))
    else:
        results = [evaluate(t) for t in trials]
    values = tuple(v for v, _ in results)
    wit = tuple(bool(w) for _, w in results)
    return EnsembleReport(selector, values, wit, threshold, params, spec, extra)


def _hp_blowup_evaluator(spec: EnsembleSpec, params: dict, extra: dict):
    """Uses the identity ``h_j(J^-1 R J, xi) = h_j(R, J xi)`` with ``R = S x T`` fixed."""
    base = spec.base_system()
    t = spec.fiber_system()
    if t is None:
        raise ValueError("hp_blowup needs a fiber system (e.g. bernoulli_cyclic)")
    coord = int(params.get("coord", 0))
    j_list = [int(j) for j in params.get("j_list", [3])]
    length = int(params.get("length", 4))
    r = skew_from_product(base, t).product
    fiber_labels = coordinate_labels(t, coord)
    k = int(fiber_labels.max()) + 1
    h_xi = entropy_from_counts(np.bincount(fiber_labels))
    half = h_xi / 2
    extra.update({"H_xi": h_xi, "j_list": j_list, "length": length})
    lag_sets = {j: [n * j for n in range(1, length + 1)] for j in j_list}
    back = {p: power_map(r.forward, -p) for lags in lag_sets.values() for p in lags}
    nb, m = base.n, t.n
    rows = np.arange(nb)[:, None]

    def evaluate(trial):
        jt = sample_family(spec, nb, spec.trial_seed(trial))
        jinv = np.empty_like(jt)
        jinv[rows, jt] = np.arange(m)[None, :]
        # label of J xi at (x, y) is xi(J^{-1}(x, y)) = C(J_x^{-1} y)
        labels = fiber_labels[jinv].ravel()
        worst = None
        for j, lags in lag_sets.items():
            code = np.zeros(nb * m, dtype=np.int64)
            for p in lags:
                code = code * k + labels[back[p]]
            hj = entropy_from_counts(np.bincount(code)) / len(lags)
            worst = hj if worst is None else min(worst, hj)
        return worst, worst > half

    return evaluate, f"h_j > H(xi)/2 = {half!r} at j in {j_list}"


@dataclass(frozen=True)
class BlockFit:
    block: int
    distances: tuple
    best: int
    margin: float
    per_lag: tuple


def family_profile(
    skew: SkewSystem,
    blocks: np.ndarray,
    candidates: Sequence[AdmissibleFunction],
    n_list: Sequence[int],
    tests: Sequence[CellFunction],
    N: int | None = None,
) -> list[BlockFit]:
    """Per-block fit of ``T_x^{lag}`` against candidate admissible functions.

    For block ``b`` and candidate ``P``, the distance is the maximum over the
    scanned lags of the block average of ``weak_limit_distance(T_x, lag, P)``.
    """
    if not skew.is_over_identity():
        raise ValueError("family profiling needs a skew product over the identity")
    blocks = np.asarray(blocks)
    if blocks.shape != (skew.n_base,):
        raise ValueError("one block label per base cell is required")
    N = len(tests) if N is None else N
    out = []
    for b in np.unique(blocks):
        xs = np.flatnonzero(blocks == b)
        fibers = [skew.fiber(int(x)) for x in xs]
        per_cand = []
        per_lag = []
        for p in candidates:
            lag_vals = []
            for lag in n_list:
                vals = [weak_limit_distance(f, int(lag), p, tests, N) for f in fibers]
                lag_vals.append(float(np.mean(vals)))
            per_lag.append(tuple(lag_vals))
            per_cand.append(max(lag_vals))
        order = np.argsort(per_cand, kind="stable")
        best = int(order[0])
        margin = float(per_cand[order[1]] - per_cand[best]) if len(order) > 1 else float("inf")
        out.append(BlockFit(int(b), tuple(per_cand), best, margin, tuple(per_lag)))
    return out
