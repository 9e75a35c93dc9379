"""Mixing, rigidity and weak-limit functionals.

All set functionals are exact: they are computed from integer cell counts and
returned as :class:`fractions.Fraction`.  ``float(value)`` gives the real.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .cellsys import CellAutomorphism, CellFunction, CellSet, DenseFamily, power_map


def _check_n(fam: DenseFamily, N: int) -> None:
    if not 1 <= N <= len(fam):
        raise ValueError(f"N={N} out of range for a family of {len(fam)} sets")


def _check_space(t: CellAutomorphism, fam: DenseFamily) -> None:
    if t.space != fam.space:
        raise ValueError("system and family live on different spaces")


def _as_fraction(a) -> Fraction:
    if isinstance(a, Rational):
        return Fraction(a)
    return Fraction(float(a))


def intersection_counts(t: CellAutomorphism, fam: DenseFamily, N: int, j: int) -> np.ndarray:
    """``C[i, k] = |A_i & T^j A_k|`` for ``i, k < N``."""
    m = fam.masks[:N].astype(np.int64)
    shifted = m[:, power_map(t.forward, -j)]
    return m @ shifted.T


def phi_mix(t: CellAutomorphism, fam: DenseFamily, N: int, j: int) -> Fraction:
    """``max_{i,k <= N} |mu(A_i & T^j A_k) - mu(A_i) mu(A_k)|``."""
    _check_space(t, fam)
    _check_n(fam, N)
    if j < 0:
        raise ValueError("lag must be non-negative")
    n = t.n
    c = intersection_counts(t, fam, N, j)
    a = fam.counts[:N]
    dev = np.abs(n * c - np.outer(a, a))
    return Fraction(int(dev.max()), n * n)


def _self_overlaps(t: CellAutomorphism, fam: DenseFamily, N: int, j: int) -> np.ndarray:
    m = fam.masks[:N]
    return (m & m[:, power_map(t.forward, -j)]).sum(axis=1)


def psi_rigid(t: CellAutomorphism, fam: DenseFamily, N: int, j: int) -> Fraction:
    """``max_{i <= N} (mu(A_i) - mu(A_i & T^j A_i))``."""
    _check_space(t, fam)
    _check_n(fam, N)
    loss = fam.counts[:N] - _self_overlaps(t, fam, N, j)
    return Fraction(int(loss.max()), t.n)


def psi_partial(t: CellAutomorphism, fam: DenseFamily, a, N: int, j: int) -> Fraction:
    """``max_{i <= N} (a mu(A_i) - mu(A_i & T^j A_i))``, ``0 < a <= 1``.

    Decimal ``a`` is taken at its exact binary value.
    """
    a = _as_fraction(a)
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    _check_space(t, fam)
    _check_n(fam, N)
    counts = fam.counts[:N]
    stay = _self_overlaps(t, fam, N, j)
    return max(a * int(c) - int(s) for c, s in zip(counts, stay)) / t.n


FUNCTIONALS = {"phi": phi_mix, "psi": psi_rigid, "psi_a": psi_partial}


@dataclass(frozen=True)
class ScanReport:
    functional: str
    N: int
    values: dict
    witnesses: tuple
    horizon: int
    period: int
    period_note: str | None
    params: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "value", "exact", "witness"])
        wit = set(self.witnesses)
        for j in sorted(self.values):
            v = self.values[j]
            w.writerow([j, repr(float(v)), str(v), int(j in wit)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "functional": self.functional,
            "N": self.N,
            "threshold": f"1/{self.N}",
            "horizon": self.horizon,
            "scanned": len(self.values),
            "witnesses": list(self.witnesses),
            "period": self.period,
            "period_note": self.period_note,
            "params": self.params,
            "note": "witness lags are those with value < 1/N; absence of witnesses means none up to the horizon",
        }


def scan(
    t: CellAutomorphism,
    fam: DenseFamily,
    N: int,
    j_range: Sequence[int],
    functional: str = "phi",
    a=None,
    workers: int = 1,
) -> ScanReport:
    """Evaluate a functional over ``j_range`` and flag lags with value ``< 1/N``."""
    if functional not in FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}")
    js = sorted(set(int(j) for j in j_range))
    if functional == "psi_a":
        if a is None:
            raise ValueError("psi_a needs the parameter a")
        fn = lambda j: psi_partial(t, fam, a, N, j)  # noqa: E731
    else:
        f = FUNCTIONALS[functional]
        fn = lambda j: f(t, fam, N, j)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(fn, js))
    else:
        vals = [fn(j) for j in js]
    values = dict(zip(js, vals))
    thr = Fraction(1, N)
    witnesses = tuple(j for j in js if values[j] < thr)
    horizon = js[-1] if js else 0
    period = t.order()
    note = None
    if period <= horizon:
        note = f"system period {period} <= horizon {horizon}: values repeat with period {period}"
    params = {"a": str(_as_fraction(a))} if a is not None else {}
    return ScanReport(functional, N, values, witnesses, horizon, period, note, params)


@dataclass(frozen=True)
class AdmissibleFunction:
    """``P(T) = c Theta + sum_i c_i T^i`` with ``c, c_i >= 0`` summing to one."""

    c: Fraction
    coeffs: tuple

    def __post_init__(self):
        raw = [self.c, *self.coeffs]
        exact = all(isinstance(x, Rational) for x in raw)
        vals = [Fraction(x) if exact else float(x) for x in raw]
        if any(v < 0 for v in vals):
            raise ValueError("admissible weights must be non-negative")
        total = sum(vals)
        if exact and total != 1:
            raise ValueError(f"weights sum to {total}, not 1")
        if not exact and abs(total - 1) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1 within 1e-12")
        object.__setattr__(self, "c", vals[0])
        object.__setattr__(self, "coeffs", tuple(vals[1:]))

    @classmethod
    def theta(cls) -> "AdmissibleFunction":
        return cls(Fraction(1), ())

    @classmethod
    def identity(cls) -> "AdmissibleFunction":
        return cls(Fraction(0), (Fraction(1),))

    @classmethod
    def mixture(cls, theta_weight, power_weights: Sequence) -> "AdmissibleFunction":
        return cls(theta_weight, tuple(power_weights))

    def __str__(self):
        terms = []
        if self.c:
            terms.append(f"{self.c}*Theta")
        terms += [f"{ci}*T^{i}" for i, ci in enumerate(self.coeffs) if ci]
        return " + ".join(terms) or "0"


def admissible_apply(p: AdmissibleFunction, t: CellAutomorphism, f: CellFunction) -> CellFunction:
    """``c mean(f) + sum_i c_i f o T^{-i}``."""
    out = np.full(f.values.shape, float(p.c) * f.mean(), dtype=f.values.dtype)
    for i, ci in enumerate(p.coeffs):
        if ci:
            out = out + float(ci) * f.values[power_map(t.forward, -i)]
    return CellFunction(f.space, out)


def weak_limit_distance(
    t: CellAutomorphism, j: int, p: AdmissibleFunction, tests: Sequence[CellFunction], N: int
) -> float:
    """``max_{m,n <= N} |<(T^j - P(T)) f_m, f_n>|`` over unit-ball test functions."""
    if not 1 <= N <= len(tests):
        raise ValueError(f"N={N} out of range for {len(tests)} test functions")
    tests = list(tests[:N])
    for f in tests:
        if f.space != t.space:
            raise ValueError("test function lives on a different space")
        if f.norm() > 1 + 1e-12:
            raise ValueError("test functions must lie in the unit ball")
    back = power_map(t.forward, -j)
    F = np.stack([f.values for f in tests])
    D = F[:, back] - np.stack([admissible_apply(p, t, f).values for f in tests])
    G = D @ F.conj().T / t.n
    return float(np.abs(G).max())


def triple_correlation(t: CellAutomorphism, a: CellSet, m: int, direction: str = "forward") -> Fraction:
    """``mu(A & T^m A & T^3m A)`` (forward) or ``mu(A & T^-m A & T^-3m A)`` (backward)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if direction not in ("forward", "backward"):
        raise ValueError("direction is 'forward' or 'backward'")
    s = m if direction == "forward" else -m
    mask = a.mask
    # T^s A has mask A[T^{-s} c]
    hit = mask & mask[power_map(t.forward, -s)] & mask[power_map(t.forward, -3 * s)]
    return Fraction(int(hit.sum()), t.n)


def asymmetry_gap(t: CellAutomorphism, a: CellSet, m: int) -> Fraction:
    return triple_correlation(t, a, m, "forward") - triple_correlation(t, a, m, "backward")


def triple_targets(mu) -> tuple[Fraction, Fraction]:
    """Limits singled out for the special transformation with asymmetric triple correlations.

    Returns ``(forward, backward)`` for ``mu(A & T^m A & T^3m A)`` and
    ``mu(A & T^-m A & T^-3m A)``: ``(mu + mu^2 + 2 mu^3) / 4`` and ``mu^2``.
    """
    mu = _as_fraction(mu)
    return (mu + mu**2 + 2 * mu**3) / 4, mu**2
