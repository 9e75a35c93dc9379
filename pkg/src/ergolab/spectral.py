"""Spectral measures of unit vectors, trapezoid arc tests and a certified singularity classifier.

Angles are measured in turns: ``z = exp(2 pi i theta)`` with ``theta in [0, 1)``.
The arc ``I_{k,P}`` is ``[k/P, (k+1)/P)``.  A correlation sequence holds
``sigma^(s) = (T^s f, f) = int z^s d sigma`` for ``|s| <= s_max``.

Two routes evaluate ``int Delta_{k,P} d sigma``:

* exact, from the atomic spectrum of a permutation operator;
* from finitely many correlations through the Fejer mean ``S_d Delta`` of the
  trapezoid, with a certified bound ``||S_d Delta - Delta||_inf * sigma^(0)``.

The sup norm is certified on a grid of ``M`` points (``M`` a multiple of ``P``)
where ``S_d Delta`` is evaluated exactly by FFT.  Between grid points
``|E(x) - E(g)| <= Lip(E) / (2M)`` with ``Lip(E) <= P + min(P, 2 pi d)``: the
trapezoid is ``P``-Lipschitz, the Fejer mean of a ``P``-Lipschitz function is
again ``P``-Lipschitz (positive kernel of mass one), and Bernstein's inequality
gives ``2 pi d ||S_d Delta||_inf <= 2 pi d``.  The result is also capped by the
closed-form bound ``P * int F_d(t) |t| dt``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .cellsys import CellAutomorphism, CellFunction

GRID_CAP = 1 << 22
FFT_SLACK = 1e-12


class DegreeError(ValueError):
    """Raised when a Fejer degree exceeds the available lags."""


@dataclass(frozen=True, eq=False)
class CorrelationSequence:
    """``sigma^(s)`` for ``s = -s_max .. s_max`` (index ``s + s_max``).

    ``band_limited`` declares ``sigma^(s) = 0`` for ``|s| > s_max``, i.e. the
    measure has a trigonometric-polynomial density; integrals are then exact.
    """

    values: np.ndarray
    source: str = ""
    band_limited: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim != 1 or v.size % 2 == 0:
            raise ValueError("values must cover s = -s_max .. s_max")
        s_max = v.size // 2
        if abs(v[s_max] - 1) > 1e-12:
            raise ValueError(f"sigma^(0) must be 1 for a unit vector, got {v[s_max]}")
        if np.abs(v[::-1] - v.conj()).max(initial=0) > 1e-12:
            raise ValueError("sequence is not Hermitian: sigma^(-s) != conj(sigma^(s))")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        _check_psd(v, s_max)

    @property
    def s_max(self) -> int:
        return self.values.size // 2

    def __getitem__(self, s: int) -> complex:
        if abs(s) > self.s_max:
            if self.band_limited:
                return 0j
            raise IndexError(f"lag {s} beyond s_max={self.s_max}")
        return complex(self.values[s + self.s_max])

    def lags(self) -> np.ndarray:
        return np.arange(-self.s_max, self.s_max + 1)

    @classmethod
    def from_nonnegative(cls, vals, source: str = "", band_limited: bool = False) -> "CorrelationSequence":
        """Build from ``sigma^(0..s_max)`` using Hermitian symmetry."""
        vals = np.asarray(vals, dtype=complex)
        full = np.concatenate([vals[:0:-1].conj(), vals])
        return cls(full, source, band_limited)

    @classmethod
    def dirac(cls, angle, s_max: int) -> "CorrelationSequence":
        s = np.arange(0, s_max + 1)
        return cls.from_nonnegative(np.exp(2j * np.pi * s * float(angle)), f"dirac({angle})")

    @classmethod
    def lebesgue(cls, s_max: int = 0) -> "CorrelationSequence":
        vals = np.zeros(s_max + 1, dtype=complex)
        vals[0] = 1
        return cls.from_nonnegative(vals, "lebesgue", band_limited=True)

    @classmethod
    def mixture(cls, parts: Sequence[tuple[float, "CorrelationSequence"]]) -> "CorrelationSequence":
        # band-limited parts extend by zeros, so only the others limit the range
        lim = [c.s_max for _, c in parts if not c.band_limited]
        s_max = min(lim) if lim else max(c.s_max for _, c in parts)
        vals = sum(w * np.array([c[s] for s in range(-s_max, s_max + 1)]) for w, c in parts)
        src = " + ".join(f"{w}*{c.source}" for w, c in parts)
        return cls(vals, src, all(c.band_limited for _, c in parts))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "re", "im"])
        for s, v in zip(self.lags(), self.values):
            w.writerow([int(s), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path_or_text, source: str | None = None, band_limited: bool = False) -> "CorrelationSequence":
        """Load columns ``s, re, im`` covering ``-s_max .. s_max`` (any row order)."""
        if isinstance(path_or_text, str) and "\n" in path_or_text:
            text, src = path_or_text, source or "csv"
        else:
            with open(path_or_text) as fh:
                text = fh.read()
            src = source or str(path_or_text)
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or not {"s", "re", "im"} <= set(rows[0]):
            raise ValueError("correlation CSV needs columns s, re, im")
        data = {int(r["s"]): complex(float(r["re"]), float(r["im"])) for r in rows}
        s_max = max(abs(s) for s in data)
        missing = [s for s in range(-s_max, s_max + 1) if s not in data]
        if missing:
            raise ValueError(f"correlation CSV misses lags {missing[:5]}")
        return cls(np.array([data[s] for s in range(-s_max, s_max + 1)]), src, band_limited)


def _check_psd(v: np.ndarray, s_max: int, order: int = 8) -> None:
    k = min(order, s_max + 1)
    if k < 2:
        return
    strides = sorted({1, max(1, s_max // (k - 1))})
    a, b = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    for d in strides:
        toeplitz = v[s_max + d * (b - a)]
        if np.linalg.eigvalsh(toeplitz).min() < -1e-9:
            raise ValueError(f"Toeplitz minor (stride {d}) is not positive semidefinite")


def correlation_sequence(t: CellAutomorphism, f: CellFunction, s_max: int) -> CorrelationSequence:
    """``(T^s f, f)`` for ``|s| <= s_max``; ``f`` must have unit norm."""
    if abs(f.norm() - 1) > 1e-12:
        raise ValueError("correlation sequences need a unit vector")
    vals = np.empty(s_max + 1, dtype=complex)
    g = f.values
    conj_f = f.values.conj()
    n = t.n
    inv = t.inverse
    for s in range(s_max + 1):
        vals[s] = np.dot(g, conj_f) / n
        g = g[inv]
    vals[0] = 1.0 if abs(vals[0] - 1) <= 1e-12 else vals[0]
    return CorrelationSequence.from_nonnegative(vals, f"system n={n}")


@dataclass(frozen=True)
class AtomicSpectrum:
    """Atoms ``(angle in turns as a Fraction, mass)`` sorted by angle."""

    atoms: tuple

    @property
    def total_mass(self) -> float:
        return math.fsum(m for _, m in self.atoms)

    def correlation(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s))
        ang = np.array([float(a) for a, _ in self.atoms])
        mass = np.array([m for _, m in self.atoms])
        return np.exp(2j * np.pi * np.outer(s, ang)) @ mass

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        ang = np.array([float(a) for a, _ in self.atoms])
        mass = np.array([m for _, m in self.atoms])
        return float(np.dot(fn(ang), mass))


def atomic_spectrum(t: CellAutomorphism, f: CellFunction, tol: float = 0.0) -> AtomicSpectrum:
    """Exact spectral measure of ``f`` for the permutation operator.

    On a cycle ``c_0 .. c_{l-1}`` the Koopman operator shifts ``g_k = f(c_k)``
    to ``g_{k-1}``, so the Fourier mode ``r`` has eigenvalue
    ``exp(-2 pi i r / l)`` and carries mass ``(l/n) |a_r|^2`` with
    ``a = fft(g) / l``.  Masses at equal angles are merged.
    """
    acc: dict[Fraction, float] = {}
    n = t.n
    for cyc in t.cycles():
        ell = cyc.size
        coef = np.fft.fft(f.values[cyc]) / ell
        mass = (ell / n) * np.abs(coef) ** 2
        for r in range(ell):
            if mass[r] > tol:
                ang = Fraction((-r) % ell, ell)
                acc[ang] = acc.get(ang, 0.0) + float(mass[r])
    return AtomicSpectrum(tuple(sorted(acc.items())))


class Trapezoid:
    """``Delta_{k,P}``: ramps up on ``I_{k-1}``, equals 1 on ``I_k``, ramps down on ``I_{k+1}``."""

    def __init__(self, k: int, P: int):
        if P < 3:
            raise ValueError("P must be at least 3")
        if not 0 <= k < P:
            raise ValueError("arc index out of range")
        self.k, self.P = k, P

    def __call__(self, theta):
        t = np.mod(np.asarray(theta, dtype=float) * self.P - self.k, self.P)
        return np.where(
            t < 1, 1.0, np.where(t < 2, 2.0 - t, np.where(t >= self.P - 1, t - (self.P - 1), 0.0))
        )

    def fourier(self, s) -> np.ndarray:
        """``int_0^1 Delta(theta) exp(-2 pi i s theta) d theta``.

        ``Delta`` is the convolution of the indicator of an arc of length
        ``2/P`` with the normalized indicator of an arc of length ``1/P``,
        centred at the midpoint of ``I_k``.
        """
        return trapezoid_fourier(s, self.P) * np.exp(-2j * np.pi * np.asarray(s) * self.k / self.P)


def delta_profile(k: int, P: int) -> Trapezoid:
    return Trapezoid(k, P)


def trapezoid_fourier(s, P: int) -> np.ndarray:
    """Fourier coefficients of ``Delta_{0,P}``."""
    s = np.asarray(s, dtype=float)
    safe = np.where(s == 0, 1.0, s)
    wide = np.where(s == 0, 2.0 / P, np.sin(2 * np.pi * s / P) / (np.pi * safe))
    narrow = np.where(s == 0, 1.0, np.sin(np.pi * s / P) / (np.pi * safe / P))
    return np.exp(-1j * np.pi * s / P) * wide * narrow


def fejer_weights(d: int) -> np.ndarray:
    s = np.arange(-d, d + 1)
    return 1.0 - np.abs(s) / (d + 1)


def fejer_abs_moment(d: int) -> float:
    """``int_{-1/2}^{1/2} F_d(t) |t| dt``; the error of ``S_d`` on a 1-Lipschitz function is at most this."""
    s = np.arange(1, d + 1, 2, dtype=float)
    return 0.25 - math.fsum(2 * (1 - s / (d + 1)) / (np.pi**2 * s**2))


@lru_cache(maxsize=64)
def fejer_uniform_error(P: int, d: int) -> tuple[float, int]:
    """Certified ``||S_d Delta_{k,P} - Delta_{k,P}||_inf`` (same for every ``k``) and the grid size used."""
    analytic = P * fejer_abs_moment(d) + FFT_SLACK
    target = min(16 * P * d, GRID_CAP)
    M = max(target, 2 * d + 2)
    M = -(-M // P) * P
    s = np.arange(-d, d + 1)
    buf = np.zeros(M, dtype=complex)
    buf[s % M] = fejer_weights(d) * trapezoid_fourier(s, P)
    approx = (np.fft.ifft(buf) * M).real
    exact = Trapezoid(0, P)(np.arange(M) / M)
    grid_max = float(np.abs(approx - exact).max())
    lip = P + min(P, 2 * np.pi * d)
    grid_bound = grid_max + lip / (2 * M) + FFT_SLACK * (1 + d)
    return min(grid_bound, analytic), M


@dataclass(frozen=True)
class ArcIntegrals:
    P: int
    d: int
    values: np.ndarray
    bound: float


def arc_integrals(corr: CorrelationSequence, P: int, d: int) -> ArcIntegrals:
    """``int Delta_{k,P} d sigma`` for every ``k`` with one shared error bound."""
    if P < 3:
        raise ValueError("P must be at least 3")
    if corr.band_limited:
        # sigma has a trigonometric-polynomial density: the Fourier pairing is exact
        s = corr.lags()
        w = trapezoid_fourier(s, P) * corr.values
        bound = 0.0
    else:
        if d > corr.s_max:
            raise DegreeError(f"degree {d} exceeds available lags s_max={corr.s_max}")
        if d < 0:
            raise DegreeError("degree must be non-negative")
        s = np.arange(-d, d + 1)
        w = fejer_weights(d) * trapezoid_fourier(s, P) * corr.values[corr.s_max - d : corr.s_max + d + 1]
        bound = fejer_uniform_error(P, d)[0] * abs(corr[0])
    # Delta_k coefficient carries exp(-2 pi i s k / P): fold s mod P and take a length-P DFT
    folded = np.zeros(P, dtype=complex)
    np.add.at(folded, s % P, w)
    values = np.fft.fft(folded).real
    return ArcIntegrals(P, d, values, bound)


def delta_integral(corr: CorrelationSequence, k: int, P: int, d: int) -> tuple[float, float]:
    """``(approximate int Delta_{k,P} d sigma, certified error bound)``."""
    Trapezoid(k, P)
    res = arc_integrals(corr, P, d)
    return float(res.values[k]), res.bound


@dataclass(frozen=True)
class DCount:
    count: int
    certified: bool
    uncertified: tuple
    P: int
    N: int
    d: int
    bound: float

    @property
    def upper(self) -> int:
        """Largest count compatible with the error intervals."""
        return self.count + len(self.uncertified)


def d_count(corr: CorrelationSequence, N: int, P: int, d: int) -> DCount:
    """Certified members of ``D(sigma, N, P) = {k : int Delta_k d sigma < 1/(NP)}``."""
    res = arc_integrals(corr, P, d)
    thr = 1.0 / (N * P)
    inside = res.values + res.bound < thr
    outside = res.values - res.bound >= thr
    unsure = tuple(int(k) for k in np.flatnonzero(~inside & ~outside))
    return DCount(int(inside.sum()), not unsure, unsure, P, N, d, res.bound)


def default_d_policy(N: int, P: int, s_max: int) -> int:
    return min(64 * P * N, s_max)


@dataclass(frozen=True)
class NRecord:
    N: int
    status: str  # "witnessed", "failed", "open"
    witness_P: int | None
    margin: float
    tried: tuple


@dataclass(frozen=True)
class SingularityVerdict:
    verdict: str
    witness: tuple | None
    margin: float
    error_budget: float
    records: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": [list(w) for w in self.witness] if self.witness else None,
            "margin": self.margin,
            "error_budget": self.error_budget,
            "per_N": [
                {
                    "N": r.N,
                    "status": r.status,
                    "witness_P": r.witness_P,
                    "margin": r.margin,
                    "tried": [
                        {"P": c.P, "d": c.d, "count": c.count, "upper": c.upper, "certified": c.certified, "bound": c.bound}
                        for c in r.tried
                    ],
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def classify_singular(
    corr: CorrelationSequence,
    N_schedule: Sequence[int],
    P_schedule: Sequence[int],
    d_policy: Callable[[int, int, int], int] | None = None,
) -> SingularityVerdict:
    """Arc-counting singularity test ``|D(sigma, N, P)| > (1 - 1/N) P``.

    ``singular_witnessed``: every ``N`` has a ``P`` whose certified count beats
    the threshold.  ``not_singular_at_horizon``: some ``N`` fails certifiably
    for every scheduled ``P``.  Otherwise ``inconclusive``.
    """
    if not N_schedule or not P_schedule:
        raise ValueError("schedules must be nonempty")
    policy = d_policy or default_d_policy
    records = []
    budget = 0.0
    for N in N_schedule:
        tried = []
        witness_P = None
        all_fail = True
        best = -math.inf
        for P in P_schedule:
            d = corr.s_max if corr.band_limited else policy(N, P, corr.s_max)
            dc = d_count(corr, N, P, d)
            budget = max(budget, dc.bound)
            tried.append(dc)
            # count > (1 - 1/N) P  <=>  N count > (N - 1) P
            if N * dc.count > (N - 1) * P:
                witness_P = P
                best = dc.count - (N - 1) * P / N
                all_fail = False
                break
            if N * dc.upper > (N - 1) * P:
                all_fail = False
            best = max(best, dc.count - (N - 1) * P / N)
        status = "witnessed" if witness_P is not None else ("failed" if all_fail else "open")
        records.append(NRecord(N, status, witness_P, float(best), tuple(tried)))
    if all(r.status == "witnessed" for r in records):
        verdict = "singular_witnessed"
        witness = tuple((r.N, r.witness_P) for r in records)
        margin = min(r.margin for r in records)
    elif any(r.status == "failed" for r in records):
        verdict = "not_singular_at_horizon"
        witness = None
        margin = min(r.margin for r in records if r.status == "failed")
    else:
        verdict = "inconclusive"
        witness = None
        margin = min(r.margin for r in records)
    return SingularityVerdict(verdict, witness, margin, budget, tuple(records))
