"""Partition entropy, refinements along lag sets and sequence (P-)entropy.

Entropies are in nats.  ``T^p xi`` is the partition with atoms ``T^p C``;
a cell ``c`` lies in ``T^p C`` iff ``T^{-p} c`` lies in ``C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .cellsys import CellAutomorphism, CellSpace, SkewSystem, conjugate, power_map


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Relabel classes 0, 1, 2, ... in order of first occurrence."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv.ravel()]


@dataclass(frozen=True, eq=False)
class Partition:
    """A labeled decomposition of the cells, canonicalized by first occurrence."""

    space: CellSpace
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (self.space.n,):
            raise ValueError("one label per cell is required")
        lab = _canonical(lab)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def class_count(self) -> int:
        return int(self.labels.max()) + 1

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def masses(self) -> list[Fraction]:
        return [Fraction(int(c), self.space.n) for c in self.counts()]

    def join(self, other: "Partition") -> "Partition":
        if other.space != self.space:
            raise ValueError("partitions live on different spaces")
        return Partition(self.space, self.labels * other.class_count + other.labels)

    def image(self, t: CellAutomorphism) -> "Partition":
        """``T xi``."""
        return Partition(self.space, self.labels[t.inverse])

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __repr__(self):
        return f"Partition(n={self.space.n}, classes={self.class_count})"


def entropy_from_counts(counts) -> float:
    counts = np.asarray(counts)
    counts = counts[counts > 0]
    total = int(counts.sum())
    if counts.size <= 1:
        return 0.0
    p = counts / total
    return math.fsum(-p * np.log(p))


def partition_entropy(xi: Partition) -> float:
    """``H(xi) = -sum m ln m`` over nonempty classes."""
    return entropy_from_counts(xi.counts())


def _lag_codes(t: CellAutomorphism, labels: np.ndarray, lags) -> list[np.ndarray]:
    return [labels[power_map(t.forward, -int(p))] for p in lags]


def _combine(columns: list[np.ndarray]) -> np.ndarray:
    code = np.zeros_like(columns[0])
    for col in columns:
        width = int(col.max()) + 1
        code = _canonical(code * width + col)
    return code


def refine(t: CellAutomorphism, xi: Partition, lags: Iterable[int]) -> Partition:
    """``V_{p in lags} T^p xi``; cells carry the tuple of labels of ``T^{-p} c``."""
    lags = list(lags)
    if not lags:
        raise ValueError("at least one lag is required")
    if t.space != xi.space:
        raise ValueError("system and partition live on different spaces")
    return Partition(xi.space, _combine(_lag_codes(t, xi.labels, lags)))


def h_j(t: CellAutomorphism, xi: Partition, lags: Iterable[int]) -> float:
    """``(1/|P_j|) H(V_{p in P_j} T^p xi)``."""
    lags = sorted(set(int(p) for p in lags))
    return partition_entropy(refine(t, xi, lags)) / len(lags)


@dataclass(frozen=True)
class SequenceFamily:
    """Schedule ``j -> P_j`` of finite sets of positive lags."""

    kind: str
    generator: Callable[[int], tuple] = field(compare=False)
    description: str = ""

    def lags(self, j: int) -> tuple[int, ...]:
        out = tuple(sorted(set(int(p) for p in self.generator(j))))
        if not out or out[0] <= 0:
            raise ValueError(f"P_{j} must be a nonempty set of positive lags")
        return out

    @classmethod
    def progression(cls, length: int | Callable[[int], int]) -> "SequenceFamily":
        """``P_j = {j, 2j, ..., L(j) j}``."""
        L = length if callable(length) else (lambda j, _l=length: _l)
        desc = f"progression L={length}" if not callable(length) else "progression L(j)"
        return cls("progression", lambda j: tuple(n * j for n in range(1, L(j) + 1)), desc)

    @classmethod
    def geometric(cls, n_of_j: Callable[[int], int]) -> "SequenceFamily":
        """``P_j = {2^i : n(j) <= i < n(j+1)}``."""
        return cls(
            "geometric",
            lambda j: tuple(2**i for i in range(n_of_j(j), n_of_j(j + 1))),
            "geometric 2^i blocks",
        )

    @classmethod
    def explicit(cls, table: dict) -> "SequenceFamily":
        frozen = {int(k): tuple(v) for k, v in table.items()}
        return cls("explicit", lambda j: frozen[j], "explicit table")


@dataclass(frozen=True)
class HPEstimate:
    """Finite-horizon lower estimate of ``limsup_j h_j``; never extrapolated."""

    value: float
    per_j: dict
    horizon: int
    note: str


def hp_estimate(t: CellAutomorphism, xi: Partition, fam: SequenceFamily, j_range) -> HPEstimate:
    j_list = sorted(set(int(j) for j in j_range))
    if not j_list:
        raise ValueError("j_range is empty")
    per_j = {j: h_j(t, xi, fam.lags(j)) for j in j_list}
    return HPEstimate(
        value=max(per_j.values()),
        per_j=per_j,
        horizon=j_list[-1],
        note=f"max of h_j over {len(j_list)} scanned j <= {j_list[-1]}; lower estimate of the limsup at this horizon",
    )


def hp_scan_library(t: CellAutomorphism, library: dict, fam: SequenceFamily, j_range) -> dict:
    """``hp_estimate`` for every partition of a declared library (not the true sup)."""
    return {name: hp_estimate(t, xi, fam, j_range) for name, xi in library.items()}


def independence_defect(t: CellAutomorphism, eta: Partition, lags: Iterable[int]) -> float:
    """``sum_p H(T^p eta) - H(V_p T^p eta)`` computed as a total correlation.

    Each joint atom contributes ``p_a ln(p_a / prod_p q_{a,p})``.  The ratio is
    evaluated in exact integer arithmetic, so jointly independent shifts give
    exactly ``0.0``.
    """
    lags = sorted(set(int(p) for p in lags))
    if not lags:
        raise ValueError("at least one lag is required")
    n = eta.space.n
    cols = _lag_codes(t, eta.labels, lags)
    width = eta.class_count
    atoms, first, joint = np.unique(_combine(cols), return_index=True, return_counts=True)
    marg = [np.bincount(col, minlength=width) for col in cols]
    m = len(lags)
    terms = []
    for a, idx, c in zip(atoms, first, joint):
        c = int(c)
        prod = 1
        for col, mc in zip(cols, marg):
            prod *= int(mc[col[idx]])
        num, den = c * n ** (m - 1), prod
        if num != den:
            terms.append(c / n * (math.log(num) - math.log(den)))
    return max(0.0, math.fsum(terms))


@dataclass(frozen=True)
class ConjugationEntropyRow:
    j: int
    lags: tuple
    h_conjugated: float
    h_image: float
    identity_gap: float
    exceeds_half: bool


@dataclass(frozen=True)
class ConjugationEntropyReport:
    entropy_xi: float
    rows: tuple

    @property
    def identity_holds(self) -> bool:
        return all(r.identity_gap <= 1e-12 for r in self.rows)

    @property
    def bound_holds(self) -> bool:
        return all(r.exceeds_half for r in self.rows)


def fiber_lift(r: SkewSystem, fiber_labels: np.ndarray) -> Partition:
    """``{X x C_1, ..., X x C_k}`` on the product space."""
    return Partition(r.space, np.tile(np.asarray(fiber_labels), r.n_base))


def conjugation_entropy_experiment(r: SkewSystem, jq: SkewSystem, xi: Partition, fam: SequenceFamily, j_range) -> ConjugationEntropyReport:
    """Check ``h_j(J^-1 R J, xi) = h_j(R, J xi)`` and the bound ``> H(xi)/2`` per scanned ``j``."""
    if xi.space != r.space:
        raise ValueError("xi must live on the product space")
    rq = conjugate(r, jq).product
    j_xi = xi.image(jq.product)
    half = partition_entropy(xi) / 2
    rows = []
    for j in sorted(set(int(j) for j in j_range)):
        lags = fam.lags(j)
        a = h_j(rq, xi, lags)
        b = h_j(r.product, j_xi, lags)
        rows.append(ConjugationEntropyRow(j, lags, a, b, abs(a - b), a > half))
    return ConjugationEntropyReport(2 * half, tuple(rows))
