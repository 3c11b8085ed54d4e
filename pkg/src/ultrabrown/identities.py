"""Ultrametric norm identities, checked exactly on random rational instances.

Each ``check_*`` returns True when the identity holds for the given data.
``fuzz`` draws random instances (with deliberate near-cancellations, since
those are where the isosceles property matters) and counts violations.

For speed the fuzzer works with integers: scalars are drawn from
``p**-3 Z`` and stored multiplied by ``p**3``, and norms are reported
multiplied by ``p**_SCALE``.  Both sides of every identity scale identically, and
the weights enter homogeneously, so integer weights lose no generality.
"""
from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable, Sequence

from .padic import norm_fraction

Number = Fraction | int


def _nm(x: Number, p: int) -> Fraction:
    return norm_fraction(x, p)


_SHIFT = 3
_SCALE = 96


def _scaled_norm(n: int, p: int) -> int:
    # |n / p**_SHIFT| * p**_SCALE for an integer n
    if n == 0:
        return 0
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    if v > _SCALE + _SHIFT:
        raise OverflowError("valuation beyond the fuzzer's scale")
    return p ** (_SCALE + _SHIFT - v)


def check_absorbed_sum(alpha: Number, beta: Number, a: Fraction, b: Fraction, p: int,
                       norm=_nm) -> bool:
    """(|alpha| a) v (|alpha+beta| b) == (|alpha| a) v (|beta| b) when a >= b >= 0."""
    lhs = max(norm(alpha, p) * a, norm(alpha + beta, p) * b)
    rhs = max(norm(alpha, p) * a, norm(beta, p) * b)
    return lhs == rhs


def check_three_weight(alphas: Sequence[Number], a: Fraction, b: Fraction, c: Fraction,
                       p: int, norm=_nm) -> bool:
    """Three-weight version with the first term absorbing the tail sum, a >= b >= c >= 0."""
    a1, rest, last = alphas[0], alphas[1:], alphas[-1]
    beta = a1 - sum(rest)
    middle = max([norm(beta, p)] + [norm(x, p) for x in alphas[1:-1]])
    lhs = max(norm(a1, p) * a, middle * b, norm(last, p) * c)
    rhs = max(norm(a1, p) * a, max(norm(x, p) for x in rest) * b)
    return lhs == rhs


def check_total_sum(alphas: Sequence[Number], a: Fraction, b: Fraction, p: int,
                       norm=_nm) -> bool:
    """Adding |sum of all| at weight a recovers the full max at weight a, a >= b >= 0."""
    head = max(norm(x, p) for x in alphas[:-1])
    lhs = max(head * a, norm(alphas[-1], p) * b, norm(sum(alphas), p) * a)
    rhs = max(norm(x, p) for x in alphas) * a
    return lhs == rhs


def check_telescoped_max(xs: Sequence[Sequence[Number]], p: int, norm=_nm) -> bool:
    """max ||x_i|| equals ||x_1|| v max ||x_i - x_{i-1}|| in the sup norm on K^d."""
    def vn(v):
        return max(norm(c, p) for c in v)

    lhs = max(vn(x) for x in xs)
    diffs = [vn([a - b for a, b in zip(xs[i], xs[i - 1])]) for i in range(1, len(xs))]
    return lhs == max([vn(xs[0])] + diffs)


def check_head_minus_tail(xs: Sequence[Sequence[Number]], p: int, norm=_nm) -> bool:
    """max ||x_i|| equals ||x_1 - sum_{j>=2} x_j|| v max_{i>=2} ||x_i||."""
    def vn(v):
        return max(norm(c, p) for c in v)

    lhs = max(vn(x) for x in xs)
    head = [xs[0][k] - sum(x[k] for x in xs[1:]) for k in range(len(xs[0]))]
    return lhs == max([vn(head)] + [vn(x) for x in xs[1:]])


def check_difference_basis_orthonormal(alphas: Sequence[Number], p: int, norm=_nm) -> bool:
    """|sum alpha_i f_i| == max |alpha_i| for f_1 = e_1, f_i = e_i - e_{i-1}."""
    n = len(alphas)
    vec = [0] * n
    for i, a in enumerate(alphas):
        vec[i] += a
        if i > 0:
            vec[i - 1] -= a
    return max(norm(c, p) for c in vec) == max(norm(a, p) for a in alphas)


def check_anchor_basis_orthonormal(alphas: Sequence[Number], p: int, norm=_nm) -> bool:
    """|sum alpha_i g_i| == max |alpha_i| for g_1 = e_1, g_i = e_i - e_1."""
    n = len(alphas)
    vec = [0] * n
    for i, a in enumerate(alphas):
        vec[i] += a
        if i > 0:
            vec[0] -= a
    return max(norm(c, p) for c in vec) == max(norm(a, p) for a in alphas)


class _Gen:
    """Random elements of p**-3 Z (stored times p**3) that collide in norm often."""

    def __init__(self, p: int, rng: random.Random):
        self.p, self.rng = p, rng

    def scalar(self) -> int:
        r = self.rng
        if r.random() < 0.1:
            return 0
        unit = r.randint(1, self.p ** 3)
        while unit % self.p == 0:
            unit = r.randint(1, self.p ** 3)
        sign = 1 if r.random() < 0.5 else -1
        return sign * unit * self.p ** r.randint(0, 2 * _SHIFT)

    def scalars(self, n: int) -> list[int]:
        xs = [self.scalar() for _ in range(n)]
        if n >= 2 and self.rng.random() < 0.3:
            # force cancellation in a partial sum
            i, j = self.rng.sample(range(n), 2)
            xs[j] = -xs[i] + self.p ** self.rng.randint(0, 4) * self.scalar()
        return xs

    def weights(self, k: int) -> list[int]:
        """k nonincreasing nonnegative weights; ties and zeros included."""
        r = self.rng
        pool = [0, 1, self.p, self.p ** 2]
        ws = [r.choice(pool) if r.random() < 0.4 else r.randint(0, 40) for _ in range(k)]
        return sorted(ws, reverse=True)


def _fuzz_absorbed(g: _Gen) -> bool:
    a, b = g.weights(2)
    alpha, beta = g.scalars(2)
    return check_absorbed_sum(alpha, beta, a, b, g.p, _scaled_norm)


def _fuzz_three_weight(g: _Gen) -> bool:
    a, b, c = g.weights(3)
    return check_three_weight(g.scalars(g.rng.randint(2, 5)), a, b, c, g.p, _scaled_norm)


def _fuzz_total_sum(g: _Gen) -> bool:
    a, b = g.weights(2)
    return check_total_sum(g.scalars(g.rng.randint(2, 5)), a, b, g.p, _scaled_norm)


def _vectors(g: _Gen) -> list[list[int]]:
    d, n = g.rng.randint(1, 3), g.rng.randint(1, 5)
    xs = [g.scalars(d) for _ in range(n)]
    if n >= 2 and g.rng.random() < 0.3:
        xs[1] = [c + g.p * g.scalar() for c in xs[0]]
    return xs


def _fuzz_telescoped(g: _Gen) -> bool:
    return check_telescoped_max(_vectors(g), g.p, _scaled_norm)


def _fuzz_head_minus_tail(g: _Gen) -> bool:
    return check_head_minus_tail(_vectors(g), g.p, _scaled_norm)


def _fuzz_difference_basis(g: _Gen) -> bool:
    n = g.rng.randint(1, 6)
    return (check_difference_basis_orthonormal(g.scalars(n), g.p, _scaled_norm)
            and check_anchor_basis_orthonormal(g.scalars(n), g.p, _scaled_norm))


SUITES: dict[str, Callable[[_Gen], bool]] = {
    "absorbed-sum": _fuzz_absorbed,
    "three-weight": _fuzz_three_weight,
    "total-sum": _fuzz_total_sum,
    "telescoped-max": _fuzz_telescoped,
    "head-minus-tail": _fuzz_head_minus_tail,
    "difference-basis": _fuzz_difference_basis,
}


def fuzz(name: str, count: int, p: int = 2, seed: int = 0) -> int:
    """Run ``count`` random instances of suite ``name``; return the number of violations."""
    if name not in SUITES:
        raise KeyError(f"unknown identity suite {name!r}; choose from {sorted(SUITES)}")
    rng = random.Random(f"{name}:{p}:{seed}")
    g = _Gen(p, rng)
    check = SUITES[name]
    return sum(not check(g) for _ in range(count))
