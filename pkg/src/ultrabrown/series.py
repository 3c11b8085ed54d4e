"""Random Mahler and van der Put series on Z_p and their stationarity.

A spec fixes the coefficient norms |a_n| = p^-v_n (units set to 1) and the
series is X(t) = sum_{n<=M} a_n Z_n f_n(t) with Z_n i.i.d. uniform on Z_p.
Values are integers modulo ``p**prec``.

The joint law of (X(t_1), ..., X(t_k)) modulo p^r is uniform on the
subgroup of (Z/p^r)^k spanned by the vectors a_n (f_n(t_1), ..., f_n(t_k)),
because each summand is uniform on a cyclic subgroup.  That gives exact
laws for the stationarity checks without simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .padic import PadicScalar, PrecisionError, vp_factorial
from .stats import TestReport, chi_square_homogeneity, tv_distance

MAHLER = "mahler"
VDP = "vdp"


@dataclass(frozen=True)
class SeriesSpec:
    """``valuations[n]`` = v_n with |a_n| = p^-v_n (``math.inf`` for a_n = 0).

    Terms n <= M are summed; any further entries only feed the reported
    truncation radius.
    """
    p: int
    basis: str
    valuations: tuple
    M: int
    prec: int
    seed: int = 0

    def __post_init__(self):
        if self.basis not in (MAHLER, VDP):
            raise ValueError(f"basis must be {MAHLER!r} or {VDP!r}")
        if self.M >= len(self.valuations):
            raise ValueError("truncation beyond the given coefficients")
        if self.p ** (2 * self.prec) >= 2 ** 62:
            raise ValueError("p**(2 prec) must stay below 2**62")
        if any(v < 0 for v in self.valuations):
            raise ValueError("coefficients must lie in Z_p (v_n >= 0)")

    @classmethod
    def from_norms(cls, p: int, basis: str, norms: Sequence[Fraction | int], M: int | None = None,
                   prec: int = 12, seed: int = 0) -> "SeriesSpec":
        vals = []
        for r in norms:
            r = Fraction(r)
            if r == 0:
                vals.append(math.inf)
                continue
            k = round(-math.log(r, p))
            if Fraction(p) ** (-k) != r:
                raise ValueError(f"norm {r} is not a power of {p}")
            vals.append(k)
        return cls(p, basis, tuple(vals), len(vals) - 1 if M is None else M, prec, seed)

    @property
    def norms(self) -> list[Fraction]:
        return [Fraction(0) if v == math.inf else Fraction(self.p) ** (-v) for v in self.valuations]

    def coefficient(self, n: int) -> int:
        v = self.valuations[n]
        return 0 if v == math.inf or v >= self.prec else self.p ** v

    @property
    def truncation_radius(self) -> Fraction:
        return max(self.norms[self.M + 1:], default=Fraction(0))


# bases -----------------------------------------------------------------------
def mahler_binom(t: PadicScalar | int, n: int, p: int | None = None,
                 prec: int | None = None) -> PadicScalar:
    """C(t, n) for t in Z_p; dividing by n! costs v_p(n!) digits."""
    if isinstance(t, int):
        if p is None or prec is None:
            raise ValueError("integer t needs p and prec")
        if t < 0:
            raise ValueError("integer t must be a natural number")
        return PadicScalar.from_int(math.comb(t, n), p, prec)
    if not t.in_unit_ball():
        raise ValueError("C(t, n) needs |t| <= 1")
    budget = t.abs_prec - vp_factorial(n, t.p)
    if budget <= 0:
        raise PrecisionError(f"C(t, {n}) needs more than {t.abs_prec} digits of t")
    return PadicScalar.from_int(math.comb(t.to_int(), n), t.p, budget)


def digit_length(n: int, p: int) -> int:
    k = 0
    while n:
        n //= p
        k += 1
    return k


def vdp_basis(t: PadicScalar | int, n: int, p: int | None = None) -> int:
    """e_n(t): 1 when the base-p digits of n are an initial segment of those of t."""
    if n == 0:
        return 1
    L = digit_length(n, p if p is not None else t.p)
    if isinstance(t, int):
        return int(t % p ** L == n)
    if L > t.abs_prec:
        raise PrecisionError(f"e_{n} needs {L} digits of t")
    return int(t.residue(L) == n)


def n_minus(n: int, p: int) -> int:
    """Drop the most significant base-p digit of n >= 1."""
    if n < 1:
        raise ValueError("n_minus is defined for n >= 1")
    return n % p ** (digit_length(n, p) - 1)


def vdp_coefficients(values: Sequence[int | Fraction], p: int) -> list:
    """a_0 = f(0), a_n = f(n) - f(n_minus) from the values f(0), ..., f(M)."""
    return [values[0]] + [values[n] - values[n_minus(n, p)] for n in range(1, len(values))]


def basis_values(spec: SeriesSpec, points: Sequence[int], modulus: int) -> np.ndarray:
    """f_n(t_i) mod ``modulus`` for integer points, shape ``(M+1, len(points))``."""
    out = np.zeros((spec.M + 1, len(points)), dtype=np.int64)
    for i, t in enumerate(points):
        t = int(t)
        if t < 0:
            raise ValueError("points must be natural numbers (integer representatives)")
        for n in range(spec.M + 1):
            if spec.basis == MAHLER:
                out[n, i] = math.comb(t, n) % modulus
            else:
                out[n, i] = vdp_basis(t, n, spec.p)
    return out


def mahler_shift_coefficients(coeffs: Sequence[int]) -> list[int]:
    """Coefficients b_n = c_n + c_{n+1} of t -> sum c_n C(t+1, n) in the Mahler basis."""
    c = list(coeffs) + [0]
    return [c[n] + c[n + 1] for n in range(len(coeffs))]


# evaluation ------------------------------------------------------------------
def draw_units(spec: SeriesSpec, paths) -> np.ndarray:
    """Z_n for n <= M, one row per replica."""
    paths = np.asarray(paths, dtype=np.int64)
    return kernels.draw_uniform(spec.seed, kernels.STREAM_SERIES, paths[:, None], 0,
                                np.arange(spec.M + 1)[None, :], 0, spec.p ** spec.prec)


@dataclass(frozen=True)
class SeriesValue:
    value: PadicScalar
    radius: Fraction  # bound on the dropped tail


def series_eval(spec: SeriesSpec, t: int, path: int = 0) -> SeriesValue:
    """X(t) for one replica, with the truncation radius."""
    vals = series_sample(spec, [t], np.array([path]))
    return SeriesValue(PadicScalar.from_int(int(vals[0, 0]), spec.p, spec.prec),
                       spec.truncation_radius)


def series_sample(spec: SeriesSpec, points: Sequence[int], paths) -> np.ndarray:
    """Values at integer points over replicas: shape ``(len(paths), len(points))``."""
    mod = spec.p ** spec.prec
    B = basis_values(spec, points, mod)
    Z = draw_units(spec, paths)
    coef = np.array([spec.coefficient(n) for n in range(spec.M + 1)], dtype=np.int64)
    za = (Z * coef[None, :]) % mod
    acc = np.zeros((Z.shape[0], len(points)), dtype=np.int64)
    for n in range(spec.M + 1):
        acc = (acc + (za[:, n:n + 1] * B[n][None, :]) % mod) % mod
    return acc


def sup_norm_on_points(spec: SeriesSpec, coeffs: Sequence[int], points: Sequence[int]) -> Fraction:
    """max_i |sum_n c_n f_n(t_i)| computed exactly in integers."""
    best = Fraction(0)
    for t in points:
        total = 0
        for n, c in enumerate(coeffs):
            f = math.comb(int(t), n) if spec.basis == MAHLER else vdp_basis(int(t), n, spec.p)
            total += c * f
        if total:
            v = 0
            while total % spec.p == 0:
                total //= spec.p
                v += 1
            best = max(best, Fraction(spec.p) ** (-v))
    return best


# stationarity predicates -------------------------------------------------------
def stationary_mahler(spec: SeriesSpec) -> bool:
    """|a_0| >= |a_1| >= ... >= |a_M|."""
    if spec.basis != MAHLER:
        raise ValueError("predicate is for Mahler series")
    v = spec.valuations[:spec.M + 1]
    return all(v[i] <= v[i + 1] for i in range(len(v) - 1))


def _block(n: int, p: int) -> int:
    """-1 for n = 0, else s with p^s <= n < p^(s+1)."""
    return digit_length(n, p) - 1 if n else -1


def stationary_vdp(spec: SeriesSpec) -> bool:
    """Norms constant on each block p^s .. p^(s+1)-1 and nonincreasing along 0, 1, p, p^2, ..."""
    if spec.basis != VDP:
        raise ValueError("predicate is for van der Put series")
    return vdp_predicate(spec.valuations[:spec.M + 1], spec.p)


def vdp_predicate(valuations: Sequence, p: int) -> bool:
    M = len(valuations) - 1
    heads = [0] + [p ** s for s in range(M.bit_length() + 1) if p ** s <= M]
    if any(valuations[a] > valuations[b] for a, b in zip(heads, heads[1:])):
        return False
    s = 0
    while p ** s <= M:
        block = valuations[p ** s:min(p ** (s + 1), M + 1)]
        if any(v != block[0] for v in block):
            return False
        s += 1
    return True


def vdp_predicate_bruteforce(valuations: Sequence, p: int) -> bool:
    """All pairs: equal norms within a block, nonincreasing norms from earlier blocks."""
    M = len(valuations) - 1
    for i in range(M + 1):
        for j in range(i + 1, M + 1):
            bi, bj = _block(i, p), _block(j, p)
            if bi == bj and valuations[i] != valuations[j]:
                return False
            if bi < bj and valuations[i] > valuations[j]:
                return False
    return True


# exact laws and tests ------------------------------------------------------------
def _span(gens: list[tuple[int, ...]], mod: int, k: int) -> set[tuple[int, ...]]:
    group = {(0,) * k}
    for g in gens:
        if all(x == 0 for x in g) or g in group:
            continue
        new = set(group)
        frontier = list(group)
        step = g
        while True:
            added = []
            for h in frontier:
                e = tuple((a + b) % mod for a, b in zip(h, step))
                if e not in new:
                    new.add(e)
                    added.append(e)
            if not added:
                break
            frontier = added
        group = new
    return group


def quotient_law_exact(spec: SeriesSpec, points: Sequence[int], r: int) -> dict[tuple, Fraction]:
    """Exact law of (X(t_i))_i mod p^r: uniform on the span of the coefficient vectors."""
    if r > spec.prec:
        raise ValueError("quotient finer than the tracked precision")
    mod = spec.p ** r
    B = basis_values(spec, points, mod)
    gens = [tuple(int(spec.coefficient(n) * x) % mod for x in B[n]) for n in range(spec.M + 1)]
    group = _span(gens, mod, len(points))
    w = Fraction(1, len(group))
    return {g: w for g in group}


def cell_id(values: np.ndarray, p: int, r: int) -> np.ndarray:
    mod = p ** r
    out = np.zeros(values.shape[0], dtype=np.int64)
    for j in range(values.shape[1]):
        out = out * mod + values[:, j] % mod
    return out


def law_vector(law: dict[tuple, Fraction], p: int, r: int, k: int) -> np.ndarray:
    vec = np.zeros(p ** (r * k))
    for cell, w in law.items():
        vec[cell_id(np.array([cell]), p, r)[0]] = float(w)
    return vec


def stationarity_test(spec: SeriesSpec, shift: int, points: Sequence[int], r: int,
                      reps: int) -> TestReport:
    """Chi-square homogeneity of (X(t_i))_i against (X(t_i + s))_i, mod p^r.

    The two samples use disjoint replicas.  ``extra`` carries the empirical
    and the exact total-variation distances.
    """
    shifted = [int(t) + int(shift) for t in points]
    a = series_sample(spec, points, np.arange(reps))
    b = series_sample(spec, shifted, np.arange(reps, 2 * reps))
    k = len(points)
    size = spec.p ** (r * k)
    ca = np.bincount(cell_id(a, spec.p, r), minlength=size)
    cb = np.bincount(cell_id(b, spec.p, r), minlength=size)
    rep = chi_square_homogeneity(ca, cb, name=f"{spec.basis}-stationarity", seed=spec.seed)
    exact_a = law_vector(quotient_law_exact(spec, points, r), spec.p, r, k)
    exact_b = law_vector(quotient_law_exact(spec, shifted, r), spec.p, r, k)
    rep.extra["tv_exact"] = tv_distance(exact_a, exact_b)
    return rep
