"""Finite-precision p-adic numbers, vectors and the ball tree of D^N.

A :class:`PadicScalar` is an element of Q_p known modulo ``p**abs_prec``.
It is stored as ``p**val * unit`` with ``unit`` coprime to p and reduced
modulo ``p**(abs_prec - val)``.  Values that are zero to the tracked
precision are represented by ``val = math.inf`` and ``unit = 0``.

Two additions are available.  ``carry=True`` is ordinary Q_p addition;
``carry=False`` adds base-p digits independently modulo p, which models the
characteristic-p field of power series over F_p.  Multiplication is only
meaningful in the carry model.

Precision bookkeeping: a product or quotient keeps the smaller of the two
relative precisions, so dividing by ``p**v * unit`` costs ``v`` absolute
digits.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

_DIGIT_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"


class PrecisionError(ValueError):
    """Raised when an operation needs more digits than are known."""


def vp(n: int, p: int) -> float | int:
    """p-adic valuation of an integer (``math.inf`` for zero)."""
    if n == 0:
        return math.inf
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_fraction(x: Fraction, p: int) -> float | int:
    if x == 0:
        return math.inf
    return vp(x.numerator, p) - vp(x.denominator, p)


def norm_fraction(x: Fraction | int, p: int) -> Fraction:
    """Exact |x|_p of a rational."""
    x = Fraction(x)
    if x == 0:
        return Fraction(0)
    return Fraction(p) ** (-vp_fraction(x, p))


def vp_factorial(n: int, p: int) -> int:
    """Legendre's formula for v_p(n!)."""
    total, q = 0, p
    while q <= n:
        total += n // q
        q *= p
    return total


def to_digits(n: int, p: int, length: int) -> list[int]:
    out = []
    for _ in range(length):
        n, r = divmod(n, p)
        out.append(r)
    return out


def from_digits(digits: Iterable[int], p: int) -> int:
    total, pw = 0, 1
    for dg in digits:
        total += dg * pw
        pw *= p
    return total


def _check_prime(p: int) -> None:
    if p < 2 or any(p % k == 0 for k in range(2, math.isqrt(p) + 1)):
        raise ValueError(f"p must be prime, got {p}")


@dataclass(frozen=True)
class PadicScalar:
    p: int
    val: float | int
    unit: int
    abs_prec: int

    def __post_init__(self):
        if self.unit == 0:
            if self.val != math.inf:
                raise ValueError("zero must carry an infinite valuation")
        else:
            if self.unit % self.p == 0:
                raise ValueError("unit must be coprime to p")
            if self.val >= self.abs_prec:
                raise ValueError("valuation must be below the absolute precision")
            if not 0 < self.unit < self.p ** (self.abs_prec - self.val):
                raise ValueError("unit not reduced")

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, p: int, prec: int) -> "PadicScalar":
        return cls(p, math.inf, 0, prec)

    @classmethod
    def from_int(cls, n: int, p: int, prec: int) -> "PadicScalar":
        _check_prime(p)
        n %= p ** prec
        if n == 0:
            return cls.zero(p, prec)
        v = vp(n, p)
        return cls(p, v, n // p ** v, prec)

    @classmethod
    def from_fraction(cls, x: Fraction | int, p: int, prec: int) -> "PadicScalar":
        """``x`` as an element known mod ``p**prec``; ``prec`` may be negative."""
        _check_prime(p)
        x = Fraction(x)
        if x == 0:
            return cls.zero(p, prec)
        v = vp_fraction(x, p)
        if v >= prec:
            return cls.zero(p, prec)
        num = x.numerator // p ** max(v, 0) if v >= 0 else x.numerator
        den = x.denominator if v >= 0 else x.denominator // p ** (-v)
        mod = p ** (prec - v)
        return cls(p, v, num * pow(den, -1, mod) % mod, prec)

    @classmethod
    def from_digits(cls, digits: Sequence[int], p: int, val: int = 0,
                    prec: int | None = None) -> "PadicScalar":
        """Digits least significant first, starting at position ``val``."""
        if any(not 0 <= dg < p for dg in digits):
            raise ValueError("digits must lie in [0, p)")
        prec = val + len(digits) if prec is None else prec
        if prec < val + len(digits):
            raise ValueError("precision shorter than the digit vector")
        n = from_digits(digits, p)
        if n == 0:
            return cls.zero(p, prec)
        v = vp(n, p)
        return cls(p, val + v, n // p ** v, prec)

    # inspection -------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.unit == 0

    @property
    def rel_prec(self) -> float | int:
        return math.inf if self.is_zero else self.abs_prec - self.val

    @property
    def digits(self) -> tuple[int, ...]:
        """Significant digits from position ``val`` up to ``abs_prec``, least significant first."""
        if self.is_zero:
            return ()
        return tuple(to_digits(self.unit, self.p, self.abs_prec - self.val))

    def digit(self, j: int) -> int:
        """Digit at absolute position ``j`` (coefficient of p**j)."""
        if j >= self.abs_prec:
            raise PrecisionError(f"digit {j} unknown at precision {self.abs_prec}")
        if self.is_zero or j < self.val:
            return 0
        return (self.unit // self.p ** (j - self.val)) % self.p

    def valuation(self) -> float | int:
        return self.val

    def norm(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return Fraction(self.p) ** (-self.val)

    def in_unit_ball(self) -> bool:
        return self.is_zero or self.val >= 0

    def residue(self, r: int) -> int:
        """Integer representative in ``[0, p**r)`` of an element of Z_p."""
        if not self.in_unit_ball():
            raise ValueError("residue needs |x| <= 1")
        if r > self.abs_prec:
            raise PrecisionError(f"residue mod p^{r} unknown at precision {self.abs_prec}")
        if self.is_zero:
            return 0
        return (self.unit * self.p ** self.val) % self.p ** r

    def to_int(self) -> int:
        return self.residue(self.abs_prec)

    def to_fraction(self) -> Fraction:
        """The rational with digit expansion exactly ``digits`` (the canonical representative)."""
        if self.is_zero:
            return Fraction(0)
        return Fraction(self.unit) * Fraction(self.p) ** self.val

    def with_prec(self, prec: int) -> "PadicScalar":
        """Reduce to a coarser absolute precision."""
        if prec > self.abs_prec:
            raise PrecisionError("cannot invent digits")
        if self.is_zero or self.val >= prec:
            return PadicScalar.zero(self.p, prec)
        return PadicScalar(self.p, self.val, self.unit % self.p ** (prec - self.val), prec)

    # arithmetic -------------------------------------------------------
    def _same_base(self, other: "PadicScalar") -> None:
        if not isinstance(other, PadicScalar):
            raise TypeError("expected a PadicScalar")
        if other.p != self.p:
            raise ValueError(f"base mismatch: {self.p} vs {other.p}")

    def _shifted(self, base: int) -> int:
        # integer n with self == n * p**base
        return 0 if self.is_zero else self.unit * self.p ** (self.val - base)

    def add(self, other: "PadicScalar", carry: bool = True) -> "PadicScalar":
        self._same_base(other)
        p = self.p
        prec = min(self.abs_prec, other.abs_prec)
        finite = [v for v in (self.val, other.val) if v != math.inf]
        if not finite:
            return PadicScalar.zero(p, prec)
        base = min(min(finite), prec)
        a, b = self._shifted(base), other._shifted(base)
        width = prec - base
        if carry:
            s = (a + b) % p ** width
        else:
            s = from_digits([(x + y) % p for x, y in
                             zip(to_digits(a, p, width), to_digits(b, p, width))], p)
        if s == 0:
            return PadicScalar.zero(p, prec)
        v = vp(s, p)
        return PadicScalar(p, base + v, s // p ** v, prec)

    def neg(self, carry: bool = True) -> "PadicScalar":
        if self.is_zero:
            return self
        mod = self.p ** (self.abs_prec - self.val)
        if carry:
            u = (-self.unit) % mod
        else:
            u = from_digits([(-dg) % self.p for dg in self.digits], self.p)
        return PadicScalar(self.p, self.val, u, self.abs_prec)

    def sub(self, other: "PadicScalar", carry: bool = True) -> "PadicScalar":
        return self.add(other.neg(carry), carry)

    def mul(self, other: "PadicScalar") -> "PadicScalar":
        self._same_base(other)
        p = self.p
        if self.is_zero or other.is_zero:
            # x known mod p^a times y with val b is known mod p^(a+b)
            cands = []
            if self.is_zero:
                cands.append(self.abs_prec + (other.val if not other.is_zero else other.abs_prec))
            if other.is_zero:
                cands.append(other.abs_prec + (self.val if not self.is_zero else self.abs_prec))
            return PadicScalar.zero(p, min(cands))
        v = self.val + other.val
        rel = min(self.rel_prec, other.rel_prec)
        return PadicScalar(p, v, (self.unit * other.unit) % p ** rel, v + rel)

    def inv(self) -> "PadicScalar":
        if self.is_zero:
            raise ZeroDivisionError("inverse of an element indistinguishable from zero")
        rel = self.rel_prec
        mod = self.p ** rel
        return PadicScalar(self.p, -self.val, pow(self.unit, -1, mod), -self.val + rel)

    def div(self, other: "PadicScalar") -> "PadicScalar":
        return self.mul(other.inv())

    __add__ = add
    __sub__ = sub
    __mul__ = mul
    __truediv__ = div

    def __neg__(self) -> "PadicScalar":
        return self.neg()

    def equals(self, other: "PadicScalar") -> bool:
        """Equality to the common precision."""
        self._same_base(other)
        return self.sub(other).is_zero

    # encodings --------------------------------------------------------
    def __str__(self) -> str:
        if self.is_zero:
            return f"0 (| {self.abs_prec})"
        body = " ".join(str(dg) for dg in self.digits)
        return f"{self.p}^{self.val} * ({body} | {self.abs_prec})"

    @classmethod
    def parse(cls, text: str) -> "PadicScalar":
        """Inverse of ``str`` for nonzero values; the zero form carries no base."""
        text = text.strip()
        if text.startswith("0 (|"):
            raise ValueError("zero text form carries no base; use parse_with_base")
        head, rest = text.split("*", 1)
        p_str, v_str = head.strip().split("^")
        body, m_str = rest.strip().strip("()").split("|")
        digits = [int(tok) for tok in body.split()]
        return cls.from_digits(digits, int(p_str), int(v_str), int(m_str))

    @classmethod
    def parse_with_base(cls, text: str, p: int) -> "PadicScalar":
        text = text.strip()
        if text.startswith("0 (|"):
            return cls.zero(p, int(text[4:].strip(" )")))
        x = cls.parse(text)
        if x.p != p:
            raise ValueError("base mismatch")
        return x

    def compact(self) -> str:
        """``p:val:digits:prec`` with one base-36 character per digit (needs p <= 36)."""
        if self.p > len(_DIGIT_CHARS):
            raise ValueError("compact form supports p <= 36")
        if self.is_zero:
            return f"{self.p}:inf::{self.abs_prec}"
        body = "".join(_DIGIT_CHARS[dg] for dg in self.digits)
        return f"{self.p}:{self.val}:{body}:{self.abs_prec}"

    @classmethod
    def from_compact(cls, text: str) -> "PadicScalar":
        p_str, v_str, body, m_str = text.split(":")
        p, m = int(p_str), int(m_str)
        if v_str == "inf":
            return cls.zero(p, m)
        return cls.from_digits([_DIGIT_CHARS.index(ch) for ch in body], p, int(v_str), m)

    def to_json(self) -> dict:
        return {"p": self.p, "val": None if self.is_zero else self.val,
                "digits": list(self.digits), "abs_prec": self.abs_prec}

    @classmethod
    def from_json(cls, obj: dict | str) -> "PadicScalar":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if obj["val"] is None:
            return cls.zero(obj["p"], obj["abs_prec"])
        return cls.from_digits(obj["digits"], obj["p"], obj["val"], obj["abs_prec"])


@dataclass(frozen=True)
class PadicVector:
    coords: tuple[PadicScalar, ...]

    def __post_init__(self):
        if not self.coords:
            raise ValueError("empty vector")
        p = self.coords[0].p
        if any(c.p != p for c in self.coords):
            raise ValueError("base mismatch between coordinates")

    @classmethod
    def from_ints(cls, values: Sequence[int], p: int, prec: int) -> "PadicVector":
        return cls(tuple(PadicScalar.from_int(v, p, prec) for v in values))

    @classmethod
    def zero(cls, p: int, dim: int, prec: int) -> "PadicVector":
        return cls(tuple(PadicScalar.zero(p, prec) for _ in range(dim)))

    @property
    def p(self) -> int:
        return self.coords[0].p

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def abs_prec(self) -> int:
        return min(c.abs_prec for c in self.coords)

    def norm(self) -> Fraction:
        return max(c.norm() for c in self.coords)

    def valuation(self) -> float | int:
        return min(c.val for c in self.coords)

    def in_unit_ball(self) -> bool:
        return all(c.in_unit_ball() for c in self.coords)

    def residues(self, r: int) -> tuple[int, ...]:
        return tuple(c.residue(r) for c in self.coords)

    def _zip(self, other: "PadicVector"):
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return zip(self.coords, other.coords)

    def add(self, other: "PadicVector", carry: bool = True) -> "PadicVector":
        return PadicVector(tuple(a.add(b, carry) for a, b in self._zip(other)))

    def sub(self, other: "PadicVector", carry: bool = True) -> "PadicVector":
        return PadicVector(tuple(a.sub(b, carry) for a, b in self._zip(other)))

    def neg(self, carry: bool = True) -> "PadicVector":
        return PadicVector(tuple(c.neg(carry) for c in self.coords))

    def scale(self, s: PadicScalar) -> "PadicVector":
        return PadicVector(tuple(c.mul(s) for c in self.coords))

    __add__ = add
    __sub__ = sub

    def __str__(self) -> str:
        return "[" + ", ".join(str(c) for c in self.coords) + "]"

    def compact(self) -> str:
        return ";".join(c.compact() for c in self.coords)


def tree_index(residues: Sequence[int], p: int, level: int) -> int:
    """Position of the level-``level`` ball containing the point among its level's balls.

    Digit ``j`` of all coordinates forms group ``j``; coordinate 1 is most
    significant within a group and group 0 is most significant overall, so
    ``parent index == index // p**N``.
    """
    N = len(residues)
    idx = 0
    for j in range(level):
        group = 0
        for i, r in enumerate(residues):
            group += ((r // p ** j) % p) * p ** (N - 1 - i)
        idx = idx * p ** N + group
    return idx


def residues_of_index(index: int, p: int, N: int, level: int) -> tuple[int, ...]:
    res = [0] * N
    fan = p ** N
    for j in range(level - 1, -1, -1):
        index, group = divmod(index, fan)
        for i in range(N):
            res[i] += ((group // p ** (N - 1 - i)) % p) * p ** j
    return tuple(res)


@dataclass(frozen=True)
class BallAddress:
    """A coset of p^level D^N, i.e. a node of the p^N-ary ball tree.

    ``path[i][j]`` is digit ``j`` of coordinate ``i``.
    """
    p: int
    N: int
    level: int
    path: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("negative level")
        if len(self.path) != self.N or any(len(row) != self.level for row in self.path):
            raise ValueError("path must be an N x level digit matrix")
        if any(not 0 <= dg < self.p for row in self.path for dg in row):
            raise ValueError("digits must lie in [0, p)")

    @classmethod
    def root(cls, p: int, N: int) -> "BallAddress":
        return cls(p, N, 0, tuple(() for _ in range(N)))

    @classmethod
    def from_residues(cls, residues: Sequence[int], p: int, level: int) -> "BallAddress":
        return cls(p, len(residues), level,
                   tuple(tuple(to_digits(r % p ** level, p, level)) for r in residues))

    @classmethod
    def from_index(cls, index: int, p: int, N: int, level: int) -> "BallAddress":
        if not 0 <= index < p ** (N * level):
            raise ValueError("index out of range")
        return cls.from_residues(residues_of_index(index, p, N, level), p, level)

    @property
    def residues(self) -> tuple[int, ...]:
        return tuple(from_digits(row, self.p) for row in self.path)

    @property
    def index(self) -> int:
        return tree_index(self.residues, self.p, self.level)

    @property
    def diameter(self) -> Fraction:
        return Fraction(1, self.p ** self.level)

    def center(self, prec: int | None = None) -> PadicVector:
        """The representative with all digits beyond ``level`` equal to zero."""
        prec = self.level if prec is None else prec
        return PadicVector.from_ints(self.residues, self.p, max(prec, self.level))

    def parent(self) -> "BallAddress":
        if self.level == 0:
            raise ValueError("the root has no parent")
        return BallAddress(self.p, self.N, self.level - 1, tuple(row[:-1] for row in self.path))

    def children(self) -> list["BallAddress"]:
        """The p^N sub-balls one level down, in tree order."""
        base = self.index * self.p ** self.N
        return [BallAddress.from_index(base + g, self.p, self.N, self.level + 1)
                for g in range(self.p ** self.N)]

    def contains(self, t: PadicVector) -> bool:
        if t.dim != self.N or not t.in_unit_ball():
            return False
        return t.residues(self.level) == self.residues

    def translate(self, s: PadicVector) -> "BallAddress":
        """Address of ``s + ball`` (carry addition, truncated to this level)."""
        if s.dim != self.N or not s.in_unit_ball():
            raise ValueError("shift must lie in D^N")
        mod = self.p ** self.level
        shifted = [(r + x) % mod for r, x in zip(self.residues, s.residues(self.level))]
        return BallAddress.from_residues(shifted, self.p, self.level)

    def __str__(self) -> str:
        rows = ",".join("".join(_DIGIT_CHARS[dg] for dg in row) for row in self.path)
        return f"L{self.level}[{rows}]"


def ball_of(t: PadicVector, level: int) -> BallAddress:
    """The level-``level`` ball of D^N containing ``t``."""
    if not t.in_unit_ball():
        raise ValueError("point outside D^N")
    if level > t.abs_prec:
        raise PrecisionError(f"level {level} exceeds precision {t.abs_prec}")
    return BallAddress.from_residues(t.residues(level), t.p, level)


class Order(enum.IntEnum):
    LT = -1
    EQ = 0
    GT = 1


def order_key(t: PadicVector) -> tuple[int, ...]:
    """Interleaved digit stream: digit 0 of every coordinate, then digit 1, ..."""
    m = t.abs_prec
    return tuple(c.digit(j) for j in range(m) for c in t.coords)


def order_compare(s: PadicVector, t: PadicVector) -> Order:
    """Total order on D^N refining the ball tree: sibling balls order their contents."""
    if not (s.in_unit_ball() and t.in_unit_ball()):
        raise ValueError("points must lie in D^N")
    if s.dim != t.dim or s.abs_prec != t.abs_prec:
        raise ValueError("points must share dimension and precision")
    ks, kt = order_key(s), order_key(t)
    return Order.LT if ks < kt else Order.GT if ks > kt else Order.EQ


def order_residues(points: Sequence[Sequence[int]], p: int, level: int) -> list[int]:
    """Argsort of integer points (coordinate residues mod p**level) in the same order."""
    return sorted(range(len(points)), key=lambda i: tree_index(points[i], p, level))
