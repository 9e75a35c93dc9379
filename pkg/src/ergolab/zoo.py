"""Named witness systems, canonical dense families and partitions.

Descriptor grammar
------------------
A system is addressed by ``kind(key=value, ...)``::

    identity(n=8)
    cyclic_rotation(n=144)
    odometer(b=2, l=8)
    bernoulli_cyclic(k=2, L=10)
    random_permutation(n=64, seed=7)

Whitespace is ignored; a bare ``kind`` is accepted when it takes no
parameters.  All values are non-negative integers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .cellsys import (
    CellAutomorphism,
    CellSet,
    CellSpace,
    DenseFamily,
    check_cells,
    get_cell_cap,
)
from .seqentropy import Partition

KINDS = {
    "identity": ("n",),
    "cyclic_rotation": ("n",),
    "odometer": ("b", "l"),
    "bernoulli_cyclic": ("k", "L"),
    "random_permutation": ("n", "seed"),
}

PARAMETER_NOTES = {
    "identity": "n >= 1 cells",
    "cyclic_rotation": "n >= 1 cells, c -> c+1 mod n",
    "odometer": "base b >= 2, levels l >= 1, b**l cells",
    "bernoulli_cyclic": "alphabet k >= 2, window L >= 2, k**L cells",
    "random_permutation": "n >= 1 cells, 64-bit seed (SplitMix64 + Fisher-Yates)",
}


class DescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class SystemDescriptor:
    kind: str
    params: tuple = field(default=())

    @classmethod
    def of(cls, kind: str, **params) -> "SystemDescriptor":
        return cls(kind, tuple(sorted(params.items())))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def cell_count(self) -> int:
        p = self.param_dict
        if self.kind == "odometer":
            return p["b"] ** p["l"]
        if self.kind == "bernoulli_cyclic":
            return p["k"] ** p["L"]
        return p["n"]

    def __str__(self):
        order = KINDS.get(self.kind, tuple(k for k, _ in self.params))
        p = self.param_dict
        return f"{self.kind}(" + ", ".join(f"{k}={p[k]}" for k in order if k in p) + ")"


_DESC_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_descriptor(text: str) -> SystemDescriptor:
    """Parse ``kind(key=value, ...)`` and validate the parameter names."""
    m = _DESC_RE.match(text)
    if not m:
        raise DescriptorError(f"cannot parse system descriptor {text!r}")
    kind, body = m.group(1), m.group(2)
    if kind not in KINDS:
        raise DescriptorError(f"unknown system kind {kind!r}; known: {', '.join(KINDS)}")
    params = {}
    if body and body.strip():
        for part in body.split(","):
            if "=" not in part:
                raise DescriptorError(f"parameter {part.strip()!r} is not key=value")
            key, val = (s.strip() for s in part.split("=", 1))
            try:
                params[key] = int(val)
            except ValueError:
                raise DescriptorError(f"parameter {key} must be an integer, got {val!r}") from None
    expected = set(KINDS[kind])
    if set(params) != expected:
        raise DescriptorError(f"{kind} takes parameters {sorted(expected)}, got {sorted(params)}")
    return SystemDescriptor.of(kind, **params)


def build(desc: SystemDescriptor | str) -> CellAutomorphism:
    """Construct the system named by a descriptor (or descriptor string)."""
    if isinstance(desc, str):
        desc = parse_descriptor(desc)
    p = desc.param_dict
    if desc.kind == "identity":
        return make_identity(p["n"])
    if desc.kind == "cyclic_rotation":
        return make_cyclic_rotation(p["n"])
    if desc.kind == "odometer":
        return make_odometer(p["b"], p["l"])
    if desc.kind == "bernoulli_cyclic":
        return make_bernoulli_cyclic(p["k"], p["L"])
    if desc.kind == "random_permutation":
        return make_random_automorphism(p["n"], p["seed"])
    raise DescriptorError(f"unknown system kind {desc.kind!r}")


def catalog() -> dict:
    return {
        "grammar": "kind(key=value, ...)",
        "cell_cap": get_cell_cap(),
        "systems": [
            {"kind": k, "parameters": list(v), "bounds": PARAMETER_NOTES[k]} for k, v in KINDS.items()
        ],
    }


def make_identity(n: int) -> CellAutomorphism:
    return CellAutomorphism(CellSpace(n), np.arange(n), SystemDescriptor.of("identity", n=n))


def make_cyclic_rotation(n: int) -> CellAutomorphism:
    """``c -> c + 1 mod n``; irrational rotations use a schedule of these approximants."""
    return CellAutomorphism(
        CellSpace(n), (np.arange(n) + 1) % n, SystemDescriptor.of("cyclic_rotation", n=n)
    )


def fibonacci_schedule(count: int, start: int = 1) -> list[int]:
    """Denominators ``1, 2, 3, 5, 8, ...`` of the golden-rotation convergents."""
    a, b = 1, 2
    out = []
    while len(out) < count:
        if a >= start:
            out.append(a)
        a, b = b, a + b
    return out


def make_odometer(b: int, l: int) -> CellAutomorphism:
    """The +1 adding machine on digit strings ``x_0 .. x_{l-1}`` with carry to the right.

    A cell is indexed by the value of its string read with ``x_0`` as the most
    significant digit, ``sum_i x_i b^(l-1-i)``.  With this indexing the dyadic
    (``b``-adic) index blocks are exactly the odometer cylinders.
    """
    if b < 2 or l < 1:
        raise ValueError("odometer needs b >= 2 and l >= 1")
    n = b**l
    check_cells(n)
    digits = _digits(np.arange(n), b, l)[:, ::-1]  # column i is x_i
    carry = np.ones(n, dtype=np.int64)
    out = digits.copy()
    for i in range(l):
        s = out[:, i] + carry
        out[:, i] = s % b
        carry = s // b
    fwd = _undigits(out[:, ::-1], b)
    return CellAutomorphism(CellSpace(n), fwd, SystemDescriptor.of("odometer", b=b, l=l))


def _digits(idx: np.ndarray, k: int, L: int) -> np.ndarray:
    """Radix-``k`` digits, column ``i`` holding the coefficient of ``k^i``."""
    return (idx[:, None] // (k ** np.arange(L, dtype=np.int64))[None, :]) % k


def _undigits(digits: np.ndarray, k: int) -> np.ndarray:
    return digits @ (k ** np.arange(digits.shape[1], dtype=np.int64))


def make_bernoulli_cyclic(k: int, L: int) -> CellAutomorphism:
    """Cyclic coordinate shift on words ``w in {0..k-1}^L``.

    Cell index is ``sum_i w_i k^i`` and ``(T w)_i = w_{i+1 mod L}``, so the
    event ``{w_c = s}`` is carried by ``T^j`` to ``{w_{c-j} = s}``.  Events on
    coordinate windows whose shifted copies stay disjoint mod ``L`` are exactly
    independent.
    """
    if k < 2 or L < 2:
        raise ValueError("bernoulli_cyclic needs k >= 2 and L >= 2")
    n = k**L
    check_cells(n)
    w = _digits(np.arange(n, dtype=np.int64), k, L)
    fwd = _undigits(np.roll(w, -1, axis=1), k)
    return CellAutomorphism(CellSpace(n), fwd, SystemDescriptor.of("bernoulli_cyclic", k=k, L=L))


def make_random_automorphism(n: int, seed: int) -> CellAutomorphism:
    check_cells(n)
    return CellAutomorphism(
        CellSpace(n), rng.random_permutation(n, seed), SystemDescriptor.of("random_permutation", n=n, seed=seed)
    )


def canonical_family(space: CellSpace, i_max: int = 16) -> DenseFamily:
    """Dyadic index blocks: ``A_i`` for ``i = 2^m + r`` is ``[floor(r n/2^m), floor((r+1) n/2^m))``."""
    if i_max < 1:
        raise ValueError("i_max must be at least 1")
    n = space.n
    idx = np.arange(n)
    sets = []
    for i in range(1, i_max + 1):
        m = i.bit_length() - 1
        r = i - (1 << m)
        lo, hi = (r * n) >> m, ((r + 1) * n) >> m
        sets.append(CellSet(space, (idx >= lo) & (idx < hi)))
    return DenseFamily(space, tuple(sets))


def _bernoulli_params(system: CellAutomorphism) -> tuple[int, int]:
    d = system.descriptor
    if not isinstance(d, SystemDescriptor) or d.kind != "bernoulli_cyclic":
        raise DescriptorError("a bernoulli_cyclic system is required")
    p = d.param_dict
    return p["k"], p["L"]


def coordinate_labels(system: CellAutomorphism, coord: int) -> np.ndarray:
    k, L = _bernoulli_params(system)
    if not 0 <= coord < L:
        raise ValueError(f"coordinate must lie in [0, {L})")
    return (np.arange(system.n) // k**coord) % k


def coordinate_partition(system: CellAutomorphism, coord: int) -> Partition:
    """Cells labeled by the symbol ``w_coord``."""
    return Partition(system.space, coordinate_labels(system, coord))


def coordinate_event(system: CellAutomorphism, coord: int, symbol: int) -> CellSet:
    """``{w_coord = symbol}``."""
    return CellSet(system.space, coordinate_labels(system, coord) == symbol)


def coordinate_family(system: CellAutomorphism, coords, symbols=None) -> DenseFamily:
    """Single-coordinate events ``{w_c = s}`` ordered by coordinate, then symbol."""
    k, _ = _bernoulli_params(system)
    symbols = range(k) if symbols is None else symbols
    return DenseFamily(
        system.space, tuple(coordinate_event(system, c, s) for c in coords for s in symbols)
    )


def shifted_window(coords, lag: int, L: int) -> set[int]:
    """Coordinates carrying ``T^lag`` of an event on ``coords``."""
    return {(c - lag) % L for c in coords}


def window_disjoint(coords, lag: int, L: int) -> bool:
    """True when ``T^lag`` moves the window ``coords`` off itself (mod ``L``)."""
    return not (set(c % L for c in coords) & shifted_window(coords, lag, L))


def windows_pairwise_disjoint(windows) -> bool:
    seen: set[int] = set()
    for w in windows:
        if seen & set(w):
            return False
        seen |= set(w)
    return True


def block_partition(space: CellSpace, blocks: int) -> Partition:
    """``blocks`` consecutive index intervals of (nearly) equal size."""
    if not 1 <= blocks <= space.n:
        raise ValueError("need 1 <= blocks <= n")
    return Partition(space, (np.arange(space.n) * blocks) // space.n)


def random_partition(space: CellSpace, classes: int, seed: int) -> Partition:
    labels = rng.random_integers(seed, space.n, classes)
    return Partition(space, labels)


def partition_library(system: CellAutomorphism, seed: int = 0, max_blocks: int = 8) -> dict[str, Partition]:
    """Declared partition library for ``sup`` over partitions scans."""
    lib = {}
    d = system.descriptor
    if isinstance(d, SystemDescriptor) and d.kind == "bernoulli_cyclic":
        lib["coord0"] = coordinate_partition(system, 0)
    b = 2
    while b <= min(max_blocks, system.n):
        lib[f"blocks{b}"] = block_partition(system.space, b)
        b *= 2
    lib[f"random2_seed{seed}"] = random_partition(system.space, 2, seed)
    return lib
