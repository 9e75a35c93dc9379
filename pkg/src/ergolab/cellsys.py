"""Exact finite model of a probability space and its automorphism group.

A :class:`CellSpace` is ``n`` cells of mass ``1/n``.  Sets are boolean masks,
automorphisms are permutations, and every measure is the exact rational
``count / n``.  Floating point only appears in functions (:class:`CellFunction`)
and in downstream entropy / spectral kernels.

Conventions
-----------
* ``compose(a, b)`` is ``a o b``: first ``b``, then ``a``.
* The Koopman operator is ``(T f)(x) = f(T^{-1} x)``, so that
  ``<T^j 1_B, 1_A> = mu(A & T^j B)``.
* Pairs of cells are indexed ``(x, y) -> x * n_fib + y``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

DEFAULT_CELL_CAP = 1 << 24
DEFAULT_I_MAX = 16

_cell_cap_override: int | None = None


class CellCapError(ValueError):
    """Raised when a construction would exceed the configured cell count cap."""


class SpaceMismatchError(ValueError):
    pass


def get_cell_cap() -> int:
    if _cell_cap_override is not None:
        return _cell_cap_override
    env = os.environ.get("ERGOLAB_CELL_CAP")
    return int(env) if env else DEFAULT_CELL_CAP


def set_cell_cap(cap: int | None) -> None:
    """Override the cell cap for this process; ``None`` restores env/default."""
    global _cell_cap_override
    _cell_cap_override = cap


def check_cells(n: int) -> None:
    cap = get_cell_cap()
    if n > cap:
        raise CellCapError(f"{n} cells exceeds the cell cap {cap}")


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CellSpace:
    """``n`` cells of equal mass ``1/n``."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a cell space needs at least one cell")
        check_cells(self.n)

    def measure(self, count: int) -> Fraction:
        return Fraction(count, self.n)

    def full(self) -> "CellSet":
        return CellSet(self, np.ones(self.n, dtype=bool))

    def empty(self) -> "CellSet":
        return CellSet(self, np.zeros(self.n, dtype=bool))


def _same_space(a, b) -> None:
    if a.space != b.space:
        raise SpaceMismatchError(f"cell spaces differ: {a.space.n} vs {b.space.n}")


@dataclass(frozen=True, eq=False)
class CellSet:
    """A subset of cells, stored as a read-only boolean mask."""

    space: CellSpace
    mask: np.ndarray

    def __post_init__(self):
        mask = _frozen(self.mask, bool)
        if mask.shape != (self.space.n,):
            raise ValueError("mask length must equal the number of cells")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_members(cls, space: CellSpace, members: Iterable[int]) -> "CellSet":
        mask = np.zeros(space.n, dtype=bool)
        idx = np.fromiter(members, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= space.n):
            raise ValueError("member index out of range")
        mask[idx] = True
        return cls(space, mask)

    @property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def measure(self) -> Fraction:
        return Fraction(self.count, self.space.n)

    def __and__(self, other: "CellSet") -> "CellSet":
        _same_space(self, other)
        return CellSet(self.space, self.mask & other.mask)

    def __or__(self, other: "CellSet") -> "CellSet":
        _same_space(self, other)
        return CellSet(self.space, self.mask | other.mask)

    def __xor__(self, other: "CellSet") -> "CellSet":
        _same_space(self, other)
        return CellSet(self.space, self.mask ^ other.mask)

    def complement(self) -> "CellSet":
        return CellSet(self.space, ~self.mask)

    def indicator(self) -> "CellFunction":
        return CellFunction(self.space, self.mask.astype(float))

    def __eq__(self, other):
        if not isinstance(other, CellSet):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.space.n, self.mask.tobytes()))

    def __repr__(self):
        m = self.members
        shown = ", ".join(map(str, m[:8])) + (", ..." if m.size > 8 else "")
        return f"CellSet(n={self.space.n}, {{{shown}}})"


@dataclass(frozen=True, eq=False)
class CellFunction:
    """A (real or complex) value per cell; ``<f, g> = (1/n) sum f conj(g)``."""

    space: CellSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        dtype = complex if np.iscomplexobj(v) else float
        v = _frozen(v, dtype)
        if v.shape != (self.space.n,):
            raise ValueError("one value per cell is required")
        object.__setattr__(self, "values", v)

    def inner(self, other: "CellFunction") -> complex | float:
        _same_space(self, other)
        val = np.vdot(other.values, self.values) / self.space.n
        return val.real if np.isrealobj(val) or val.imag == 0 else complex(val)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.values, self.values).real / self.space.n))

    def mean(self):
        m = self.values.mean()
        return float(m) if np.isrealobj(self.values) else complex(m)

    def normalized(self) -> "CellFunction":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero function")
        return CellFunction(self.space, self.values / nrm)

    def __add__(self, other: "CellFunction") -> "CellFunction":
        _same_space(self, other)
        return CellFunction(self.space, self.values + other.values)

    def __sub__(self, other: "CellFunction") -> "CellFunction":
        _same_space(self, other)
        return CellFunction(self.space, self.values - other.values)

    def __mul__(self, c) -> "CellFunction":
        return CellFunction(self.space, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class CellAutomorphism:
    """A permutation of cells; ``forward[c]`` is the image of cell ``c``.

    ``descriptor`` records the zoo constructor that built the system, if any.
    """

    space: CellSpace
    forward: np.ndarray
    descriptor: object = field(default=None, compare=False)
    inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        fwd = _frozen(self.forward, np.int64)
        n = self.space.n
        if fwd.shape != (n,):
            raise ValueError("forward map must have one entry per cell")
        inv = np.full(n, -1, dtype=np.int64)
        if n and (fwd.min() < 0 or fwd.max() >= n):
            raise ValueError("forward map leaves the cell space")
        inv[fwd] = np.arange(n)
        if (inv < 0).any():
            raise ValueError("forward map is not a permutation")
        inv.setflags(write=False)
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def identity(cls, space: CellSpace) -> "CellAutomorphism":
        return cls(space, np.arange(space.n))

    @property
    def n(self) -> int:
        return self.space.n

    def __call__(self, cell):
        return self.forward[cell]

    def inv(self) -> "CellAutomorphism":
        return CellAutomorphism(self.space, self.inverse)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.forward, np.arange(self.n)))

    def cycle_labels(self) -> tuple[int, np.ndarray]:
        """Number of cycles and the cycle label of every cell."""
        n = self.n
        graph = csr_matrix((np.ones(n, dtype=np.int8), (np.arange(n), self.forward)), shape=(n, n))
        return connected_components(graph, directed=True, connection="weak")

    def cycle_lengths(self) -> np.ndarray:
        k, labels = self.cycle_labels()
        return np.bincount(labels, minlength=k)

    def order(self) -> int:
        """Least ``p >= 1`` with ``T^p = Id`` (lcm of cycle lengths)."""
        out = 1
        for length in np.unique(self.cycle_lengths()):
            out = np.lcm(out, int(length))
        return int(out)

    def cycles(self) -> list[np.ndarray]:
        """Cycles as arrays ``(c, T c, T^2 c, ...)`` starting at their smallest cell."""
        seen = np.zeros(self.n, dtype=bool)
        fwd = self.forward
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = [start]
            seen[start] = True
            c = int(fwd[start])
            while c != start:
                cyc.append(c)
                seen[c] = True
                c = int(fwd[c])
            out.append(np.array(cyc, dtype=np.int64))
        return out

    def __eq__(self, other):
        if not isinstance(other, CellAutomorphism):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.forward, other.forward)

    def __hash__(self):
        return hash((self.n, self.forward.tobytes()))

    def __repr__(self):
        kind = f", {self.descriptor}" if self.descriptor is not None else ""
        return f"CellAutomorphism(n={self.n}{kind})"

    def to_dict(self) -> dict:
        return {"n": self.n, "forward": self.forward.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "CellAutomorphism":
        n = int(doc["n"])
        return cls(CellSpace(n), np.asarray(doc["forward"], dtype=np.int64))


def compose(a: CellAutomorphism, b: CellAutomorphism) -> CellAutomorphism:
    """``a o b`` (apply ``b`` first)."""
    _same_space(a, b)
    return CellAutomorphism(a.space, a.forward[b.forward])


def inverse(t: CellAutomorphism) -> CellAutomorphism:
    return t.inv()


def power_map(forward: np.ndarray, s: int) -> np.ndarray:
    """Forward array of ``T^s`` by repeated squaring; ``forward`` must be a permutation."""
    n = forward.shape[0]
    if s < 0:
        inv = np.empty_like(forward)
        inv[forward] = np.arange(n)
        forward, s = inv, -s
    result = np.arange(n, dtype=np.int64)
    base = np.asarray(forward, dtype=np.int64)
    while s:
        if s & 1:
            result = base[result]
        s >>= 1
        if s:
            base = base[base]
    return result


def power(t: CellAutomorphism, s: int) -> CellAutomorphism:
    """``T^s`` for any signed integer ``s``."""
    return CellAutomorphism(t.space, power_map(t.forward, int(s)))


def apply_set(t: CellAutomorphism, a: CellSet) -> CellSet:
    """Image ``T A``; its mask at ``c`` is ``A[T^{-1} c]``."""
    _same_space(t, a)
    return CellSet(t.space, a.mask[t.inverse])


def koopman(t: CellAutomorphism, f: CellFunction, s: int = 1) -> CellFunction:
    """``T^s f = f o T^{-s}``."""
    _same_space(t, f)
    return CellFunction(t.space, f.values[power_map(t.forward, -s)])


def direct_product(s: CellAutomorphism, t: CellAutomorphism) -> CellAutomorphism:
    """``S x T`` on ``n_s * n_t`` cells, ``(x, y) -> (Sx, Ty)``."""
    m = t.n
    check_cells(s.n * m)
    fwd = (s.forward[:, None] * m + t.forward[None, :]).ravel()
    return CellAutomorphism(CellSpace(s.n * m), fwd)


def product_set(a: CellSet, b: CellSet) -> CellSet:
    """``A x B`` in the paired index."""
    check_cells(a.space.n * b.space.n)
    return CellSet(CellSpace(a.space.n * b.space.n), np.outer(a.mask, b.mask).ravel())


def product_function(f: CellFunction, g: CellFunction) -> CellFunction:
    check_cells(f.space.n * g.space.n)
    return CellFunction(CellSpace(f.space.n * g.space.n), np.outer(f.values, g.values).ravel())


@dataclass(frozen=True, eq=False)
class SkewSystem:
    """Skew product ``R(x, y) = (S x, R_x y)``.

    ``table[x]`` is the forward array of the fiber automorphism ``R_x``.
    """

    base: CellAutomorphism
    fiber_space: CellSpace
    table: np.ndarray
    product: CellAutomorphism = field(init=False, repr=False)

    def __post_init__(self):
        nb, m = self.base.n, self.fiber_space.n
        check_cells(nb * m)
        table = _frozen(self.table, np.int64)
        if table.shape != (nb, m):
            raise ValueError(f"fiber table must have shape ({nb}, {m}), got {table.shape}")
        srt = np.sort(table, axis=1)
        if not np.array_equal(srt, np.broadcast_to(np.arange(m), (nb, m))):
            raise ValueError("every fiber map must be a permutation of the fiber cells")
        fwd = (self.base.forward[:, None] * m + table).ravel()
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "product", CellAutomorphism(CellSpace(nb * m), fwd))

    @property
    def n_base(self) -> int:
        return self.base.n

    @property
    def n_fib(self) -> int:
        return self.fiber_space.n

    @property
    def space(self) -> CellSpace:
        return self.product.space

    @property
    def fibers(self) -> list[CellAutomorphism]:
        return [CellAutomorphism(self.fiber_space, row) for row in self.table]

    def fiber(self, x: int) -> CellAutomorphism:
        return CellAutomorphism(self.fiber_space, self.table[x])

    def is_over_identity(self) -> bool:
        """Membership in the class of skew products over the identity."""
        return self.base.is_identity()

    def inverse_table(self) -> np.ndarray:
        inv = np.empty_like(self.table)
        rows = np.arange(self.n_base)[:, None]
        inv[rows, self.table] = np.arange(self.n_fib)[None, :]
        return inv

    def __eq__(self, other):
        if not isinstance(other, SkewSystem):
            return NotImplemented
        return self.base == other.base and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.base, self.table.tobytes()))

    def __repr__(self):
        return f"SkewSystem(n_base={self.n_base}, n_fib={self.n_fib})"

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "fibers": self.table.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "SkewSystem":
        base = CellAutomorphism.from_dict(doc["base"])
        table = np.asarray(doc["fibers"], dtype=np.int64)
        if table.ndim != 2:
            raise ValueError("fibers must be a list of forward arrays")
        return cls(base, CellSpace(table.shape[1]), table)


def build_skew(base: CellAutomorphism, fibers: Sequence[CellAutomorphism]) -> SkewSystem:
    if len(fibers) != base.n:
        raise ValueError(f"expected {base.n} fiber maps, got {len(fibers)}")
    if not fibers:
        raise ValueError("at least one fiber map is required")
    space = fibers[0].space
    for f in fibers:
        if f.space != space:
            raise SpaceMismatchError("all fiber maps must share one fiber space")
    return SkewSystem(base, space, np.stack([f.forward for f in fibers]))


def skew_from_product(s: CellAutomorphism, t: CellAutomorphism) -> SkewSystem:
    """``S x T`` as a skew product with the constant fiber family ``R_x = T``."""
    return SkewSystem(s, t.space, np.broadcast_to(t.forward, (s.n, t.n)))


def conjugate(r: SkewSystem, j: SkewSystem) -> SkewSystem:
    """``J^{-1} R J`` for ``J`` over the identity; fibers ``J_{Sx}^{-1} R_x J_x``."""
    if not j.is_over_identity():
        raise ValueError("the conjugating system must be a skew product over the identity")
    if j.base.space != r.base.space or j.fiber_space != r.fiber_space:
        raise SpaceMismatchError("conjugating system lives on a different space")
    jinv = j.inverse_table()
    rows = np.arange(r.n_base)[:, None]
    inner = r.table[rows, j.table]
    table = jinv[r.base.forward[:, None], inner]
    return SkewSystem(r.base, r.fiber_space, table)


@dataclass(frozen=True, eq=False)
class DenseFamily:
    """Finite ordered family ``A_1 .. A_I`` with weights ``2^{-i}``."""

    space: CellSpace
    sets: tuple

    def __post_init__(self):
        sets = tuple(self.sets)
        for a in sets:
            if a.space != self.space:
                raise SpaceMismatchError("family sets must share one cell space")
        object.__setattr__(self, "sets", sets)
        masks = np.stack([a.mask for a in sets]) if sets else np.zeros((0, self.space.n), bool)
        masks.setflags(write=False)
        object.__setattr__(self, "_masks", masks)

    @property
    def masks(self) -> np.ndarray:
        return self._masks

    @property
    def counts(self) -> np.ndarray:
        return self._masks.sum(axis=1).astype(np.int64)

    def __len__(self) -> int:
        return len(self.sets)

    def __getitem__(self, i):
        return self.sets[i]

    @property
    def i_max(self) -> int:
        return len(self.sets)

    def weights(self) -> list[Fraction]:
        return [Fraction(1, 2**i) for i in range(1, len(self.sets) + 1)]

    def tail_bound(self) -> Fraction:
        """Upper bound on the omitted terms ``i > I_max`` of the Halmos series."""
        # each term is at most 2 * 2^{-i}
        return Fraction(2, 2 ** len(self.sets))

    def conjugated(self, phi: CellAutomorphism) -> "DenseFamily":
        """The family ``Phi^{-1} A_i``."""
        inv = phi.inv()
        return DenseFamily(self.space, tuple(apply_set(inv, a) for a in self.sets))


@dataclass(frozen=True)
class HalmosDistance:
    value: Fraction
    tail_bound: Fraction
    i_max: int

    def __float__(self):
        return float(self.value)


def _overlap_counts(masks: np.ndarray, fwd: np.ndarray) -> np.ndarray:
    """``|A_i & T A_i|`` per row, where ``fwd`` is the forward map of ``T``."""
    return (masks & masks[:, fwd]).sum(axis=1)


def halmos_distance(s: CellAutomorphism, t: CellAutomorphism, fam: DenseFamily) -> HalmosDistance:
    """Truncated Halmos distance ``sum_i 2^{-i}(mu(SA_i ^ TA_i) + mu(S^-1 A_i ^ T^-1 A_i))``."""
    _same_space(s, t)
    if fam.space != s.space:
        raise SpaceMismatchError("family lives on a different space")
    if len(fam) == 0:
        raise ValueError("the dense family is empty")
    m = fam.masks
    # images of A under S and T have masks A[S^{-1} c], A[T^{-1} c]
    fwd_diff = (m[:, s.inverse] ^ m[:, t.inverse]).sum(axis=1)
    inv_diff = (m[:, s.forward] ^ m[:, t.forward]).sum(axis=1)
    i_max = len(fam)
    num = sum(int(d) << (i_max - i) for i, d in enumerate(fwd_diff + inv_diff, start=1))
    return HalmosDistance(Fraction(num, s.n << i_max), fam.tail_bound(), i_max)


def halmos_to_identity_counts(tables: np.ndarray, fam: DenseFamily) -> np.ndarray:
    """Integer numerators of ``rho(C, Id)`` over the common denominator ``n * 2^I``.

    ``tables`` holds one forward array per row.  For a permutation ``C``,
    ``mu(CA ^ A) = mu(C^-1 A ^ A) = 2 (mu(A) - mu(A & C^-1 A))``.
    """
    m = fam.masks
    counts = fam.counts
    i_max = len(fam)
    num = np.zeros(tables.shape[0], dtype=object if i_max > 40 else np.int64)
    for i in range(i_max):
        stay = m[i][tables] & m[i][None, :]
        moved = counts[i] - stay.sum(axis=1)
        num = num + 4 * moved * (1 << (i_max - 1 - i))
    return num


def save_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh)


def load_automorphism(path) -> CellAutomorphism:
    with open(path) as fh:
        return CellAutomorphism.from_dict(json.load(fh))


def load_skew(path) -> SkewSystem:
    with open(path) as fh:
        return SkewSystem.from_dict(json.load(fh))
