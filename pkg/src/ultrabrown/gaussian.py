"""K-Gaussian variables: Haar measure on balls p^n D^d, sampled from a keyed generator.

Samples are handled in bulk as integer arrays of residues modulo ``p**prec``
(an element of p^n D known mod p^prec).  :func:`sample` wraps one draw as a
:class:`~ultrabrown.padic.PadicVector`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kernels
from .padic import PadicScalar, PadicVector, vp
from .stats import TestReport, chi_square_contingency, chi_square_uniform


@dataclass(frozen=True)
class GaussianSpec:
    """Law of a K-Gaussian vector uniform on p^level D^dim, tracked mod p^prec."""
    p: int
    level: int
    dim: int
    prec: int
    zero: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not self.zero and self.prec <= self.level:
            raise ValueError(f"precision {self.prec} must exceed level {self.level}")
        if self.p ** self.prec >= 2 ** 62:
            raise ValueError("p**prec must stay below 2**62")

    @property
    def modulus(self) -> int:
        return self.p ** self.prec

    @property
    def sup_norm(self) -> Fraction:
        """||X||_inf, the radius of the supporting ball."""
        return Fraction(0) if self.zero else Fraction(1, self.p ** self.level)

    def prob_full_norm(self) -> Fraction:
        """P{|X| = radius}: at least one coordinate has a nonzero leading digit."""
        return Fraction(0) if self.zero else 1 - Fraction(1, self.p ** self.dim)


@dataclass(frozen=True)
class RngKey:
    """Hierarchical key: ``address`` is a (level, ball index) pair, ``counter`` a draw id."""
    seed: int
    address: tuple[int, int] = (0, 0)
    counter: int = 0
    stream: int = kernels.STREAM_GAUSS


def _units(spec: GaussianSpec, seed: int, stream: int, counters, level: int, index) -> np.ndarray:
    return kernels.draw_uniform(seed, stream, np.asarray(counters)[..., None], level,
                                np.asarray(index)[..., None], np.arange(spec.dim),
                                spec.p ** (spec.prec - spec.level))


def sample(spec: GaussianSpec, key: RngKey) -> PadicVector:
    """One draw; a pure function of ``(spec, key)``."""
    if spec.zero:
        return PadicVector.zero(spec.p, spec.dim, spec.prec)
    level, index = key.address
    u = _units(spec, key.seed, key.stream, np.array([key.counter]), level, np.array([index]))[0]
    return PadicVector.from_ints([int(x) * spec.p ** spec.level for x in u], spec.p, spec.prec)


def sample_batch(spec: GaussianSpec, seed: int, count: int, start: int = 0,
                 stream: int = kernels.STREAM_GAUSS, address: tuple[int, int] = (0, 0)) -> np.ndarray:
    """``count`` draws with counters ``start .. start+count-1``, shape ``(count, dim)``.

    Row ``i`` equals ``sample(spec, RngKey(seed, address, start + i, stream))``.
    """
    if spec.zero:
        return np.zeros((count, spec.dim), dtype=np.int64)
    counters = np.arange(start, start + count, dtype=np.int64)
    level, index = address
    u = _units(spec, seed, stream, counters, level, np.full(count, index, dtype=np.int64))
    return u * spec.p ** spec.level


def char_exact(spec: GaussianSpec, xi: PadicScalar | Fraction | int) -> int:
    """E[chi(xi X)] for one-dimensional X: 1 when |xi| ||X|| <= 1, else 0."""
    if spec.dim != 1:
        raise ValueError("characteristic function is one-dimensional")
    if spec.zero:
        return 1
    if isinstance(xi, PadicScalar):
        v = xi.val
    else:
        v = vp(Fraction(xi).numerator, spec.p) - vp(Fraction(xi).denominator, spec.p) \
            if Fraction(xi) != 0 else math.inf
    return 1 if v >= -spec.level else 0


def frac_part(xi: Fraction, x: np.ndarray, p: int, prec: int) -> np.ndarray:
    """p-adic fractional part {xi * x}_p for integers ``x`` known mod p**prec."""
    xi = Fraction(xi)
    if xi == 0:
        return np.zeros(np.shape(x))
    k = max(0, -(vp(xi.numerator, p) - vp(xi.denominator, p)))
    if k == 0:
        return np.zeros(np.shape(x))
    if k > prec:
        raise ValueError(f"|xi| = p^{k} needs {k} digits, only {prec} known")
    mod = p ** k
    den = xi.denominator // p ** k
    c = xi.numerator * pow(den, -1, mod) % mod
    xr = np.asarray(x, dtype=np.int64) % mod
    if mod * mod < 2 ** 62:
        num = (c * xr) % mod
    else:
        num = np.array([(c * int(t)) % mod for t in xr.ravel()], dtype=np.int64).reshape(xr.shape)
    return num / mod


def char_empirical(samples: np.ndarray, xi: Fraction | int, p: int, prec: int) -> complex:
    """Sample mean of exp(2 pi i {xi x}_p)."""
    x = np.asarray(samples).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    return complex(np.exp(2j * np.pi * frac_part(Fraction(xi), x, p, prec)).mean())


def transform(X: np.ndarray, A, p: int, prec: int) -> np.ndarray:
    """Rows of ``X`` times the integer matrix ``A``, reduced mod p**prec."""
    X = np.asarray(X, dtype=np.int64)
    A = np.asarray(A, dtype=object)
    if X.ndim != 2 or A.ndim != 2 or X.shape[1] != A.shape[0]:
        raise ValueError(f"dimension mismatch: {X.shape} @ {A.shape}")
    mod = p ** prec
    out = (X.astype(object) @ (A % mod)) % mod
    return out.astype(np.int64)


def quotient_cells(x: np.ndarray, p: int, r: int) -> np.ndarray:
    """Encode rows of residues as one integer cell id in (D / p^r D)^d."""
    x = np.asarray(x, dtype=np.int64)
    if x.ndim == 1:
        x = x[:, None]
    mod = p ** r
    cell = np.zeros(x.shape[0], dtype=np.int64)
    for j in range(x.shape[1]):
        cell = cell * mod + x[:, j] % mod
    return cell


def uniformity_test(samples: np.ndarray, p: int, r: int, name: str = "quotient-uniform",
                    seed: int | None = None) -> TestReport:
    """Chi-square of the image in (D/p^r D)^d against the uniform law."""
    samples = np.asarray(samples)
    d = 1 if samples.ndim == 1 else samples.shape[1]
    counts = np.bincount(quotient_cells(samples, p, r), minlength=p ** (r * d))
    return chi_square_uniform(counts, name=name, seed=seed)


def independence_test(u: np.ndarray, v: np.ndarray, p: int, r: int,
                      name: str = "independence", seed: int | None = None) -> TestReport:
    """Chi-square contingency of (u mod p^r, v mod p^r)."""
    cu, cv = quotient_cells(u, p, r), quotient_cells(v, p, r)
    if cu.shape != cv.shape:
        raise ValueError("paired samples must have equal length")
    ku, kv = int(cu.max()) + 1, int(cv.max()) + 1
    table = np.bincount(cu * kv + cv, minlength=ku * kv).reshape(ku, kv)
    return chi_square_contingency(table, name=name, seed=seed)


def write_samples_csv(path: str | Path, samples: np.ndarray, p: int, prec: int) -> None:
    """One row per sample with each coordinate in compact digit form."""
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample"] + [f"x{j}" for j in range(samples.shape[1])])
        for i, row in enumerate(samples):
            w.writerow([i] + [PadicScalar.from_int(int(x), p, prec).compact() for x in row])
