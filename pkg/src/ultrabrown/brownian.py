"""Brownian sheets X: D^N -> K^d built from independent Gaussian weights on the ball tree.

Every ball C at level k carries a weight Z_C uniform on p^k D^d, and
X(t) = sum_k Z_{C_k(t)} where C_k(t) is the level-k ball containing t.
Truncating at level ``depth`` gives X^depth, which agrees with X modulo
p^(depth+1), so values are tracked as integers modulo ``p**(depth+1)``.

Weights are drawn lazily from the keyed generator: nothing is stored, and
replica ``path`` of a configuration is simply another key.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .gaussian import quotient_cells
from .padic import (BallAddress, Order, PadicVector, order_compare, residues_of_index, vp)
from .stats import (MCEstimate, TestReport, chi_square_contingency, chi_square_expected,
                    chi_square_homogeneity, mc_mean)


class OutsideSupportError(ValueError):
    """The target function is not a possible path, so the probability is exactly 0."""
    probability = Fraction(0)


@dataclass(frozen=True)
class BrownianConfig:
    p: int
    N: int
    d: int
    depth: int
    seed: int = 0
    carry: bool = True
    path: int = 0

    def __post_init__(self):
        if self.N < 1 or self.d < 1 or self.depth < 0:
            raise ValueError("need N >= 1, d >= 1, depth >= 0")
        if self.p ** (self.depth + 1) >= 2 ** 62:
            raise ValueError("p**(depth+1) must stay below 2**62")

    @property
    def prec(self) -> int:
        return self.depth + 1

    @property
    def modulus(self) -> int:
        return self.p ** self.prec

    def paths(self, reps: int, start: int = 0) -> np.ndarray:
        """Replica ids ``path + start .. path + start + reps - 1``."""
        return np.arange(reps, dtype=np.int64) + self.path + start


# modular helpers on integer residues ---------------------------------------
def sub_mod(a, b, p: int, prec: int, carry: bool) -> np.ndarray:
    """a - b in Z/p^prec, or digit-wise mod p when ``carry`` is false."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if carry:
        return (a - b) % p ** prec
    out = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    pw = 1
    for _ in range(prec):
        out += (((a // pw) - (b // pw)) % p) * pw
        pw *= p
    return out


def valuation_mod(x, p: int, prec: int) -> np.ndarray:
    """Valuation of residues mod p^prec, capped at ``prec`` (which stands for 'zero so far')."""
    x = np.asarray(x, dtype=np.int64) % p ** prec
    v = np.full(x.shape, prec, dtype=np.int64)
    for j in range(prec - 1, -1, -1):
        v = np.where(x % p ** (j + 1) != 0, j, v)
    return v


def index_distance_valuation(s: Sequence[int], t: Sequence[int], p: int, cap: int) -> int:
    """v(s - t) for index points, capped at ``cap``."""
    return int(min(min(vp(a - b, p), cap) for a, b in zip(s, t)))


# single-point interface ----------------------------------------------------
def _point_residues(cfg: BrownianConfig, t: PadicVector) -> tuple[int, ...]:
    if t.dim != cfg.N:
        raise ValueError(f"index point must have {cfg.N} coordinates")
    if not t.in_unit_ball():
        raise ValueError("index point outside D^N")
    if t.abs_prec < cfg.depth:
        raise ValueError(f"index point needs {cfg.depth} digits, has {t.abs_prec}")
    return t.residues(cfg.depth)


def weight(cfg: BrownianConfig, ball: BallAddress) -> PadicVector:
    """Z_C for the ball C; uniform on p^level D^d."""
    if ball.p != cfg.p or ball.N != cfg.N:
        raise ValueError("ball does not live in this index space")
    if ball.level > cfg.depth:
        raise ValueError("ball below the retained depth")
    k = ball.level
    u = kernels.draw_uniform(cfg.seed, kernels.STREAM_WEIGHT, cfg.path, k, ball.index,
                             np.arange(cfg.d), cfg.p ** (cfg.prec - k))
    return PadicVector.from_ints([int(x) * cfg.p ** k for x in u], cfg.p, cfg.prec)


def evaluate(cfg: BrownianConfig, t: PadicVector) -> PadicVector:
    """X^depth(t); agrees with X(t) to within p^-(depth+1)."""
    res = np.array([_point_residues(cfg, t)], dtype=np.int64)
    vals = evaluate_many(cfg, res, np.array([cfg.path]))[0, 0]
    return PadicVector.from_ints([int(x) for x in vals], cfg.p, cfg.prec)


def evaluate_many(cfg: BrownianConfig, points, paths=None) -> np.ndarray:
    """Values at integer index points (rows of residues), shape ``(paths, points, d)``."""
    paths = np.array([cfg.path]) if paths is None else np.asarray(paths, dtype=np.int64)
    points = np.asarray(points, dtype=np.int64).reshape(-1, cfg.N)
    return kernels.eval_points(cfg.seed, kernels.STREAM_WEIGHT, paths, cfg.p, cfg.N, cfg.d,
                               cfg.depth, cfg.prec, cfg.carry, points % cfg.p ** cfg.depth)


@dataclass(frozen=True)
class ShiftedPath:
    """The path t -> X(s + t), realised by translating ball addresses."""
    cfg: BrownianConfig
    shift: tuple[int, ...]

    def evaluate(self, t: PadicVector) -> PadicVector:
        res = _point_residues(self.cfg, t)
        mod = self.cfg.p ** self.cfg.depth
        moved = tuple((a + b) % mod for a, b in zip(res, self.shift))
        return evaluate(self.cfg, PadicVector.from_ints(moved, self.cfg.p, self.cfg.depth))

    def evaluate_many(self, points, paths=None) -> np.ndarray:
        pts = np.asarray(points, dtype=np.int64).reshape(-1, self.cfg.N)
        return evaluate_many(self.cfg, pts + np.asarray(self.shift), paths)

    def then(self, s: PadicVector) -> "ShiftedPath":
        """Shift once more: X(s' + s + t)."""
        mod = self.cfg.p ** self.cfg.depth
        extra = _point_residues(self.cfg, s)
        return ShiftedPath(self.cfg, tuple((a + b) % mod for a, b in zip(self.shift, extra)))


def shift(cfg: BrownianConfig, s: PadicVector) -> ShiftedPath:
    return ShiftedPath(cfg, _point_residues(cfg, s))


# grids ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class GridRestriction:
    """Partial sums A_C for every level-n ball C, rows in tree order."""
    p: int
    N: int
    level: int
    values: np.ndarray = field(repr=False)
    prec: int = 0

    def at(self, ball: BallAddress) -> np.ndarray:
        if ball.level != self.level:
            raise ValueError("ball is on another level")
        return self.values[ball.index]

    def rows(self):
        for i, row in enumerate(self.values):
            yield BallAddress.from_index(i, self.p, self.N, self.level), row

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "address"] + [f"A{j}" for j in range(self.values.shape[1])])
            for i, (ball, row) in enumerate(self.rows()):
                w.writerow([i, str(ball)] + [
                    PadicVector.from_ints([int(x)], self.p, self.prec).coords[0].compact()
                    for x in row])


def grid(cfg: BrownianConfig, n: int) -> GridRestriction:
    if n > cfg.depth:
        raise ValueError(f"grid level {n} exceeds depth {cfg.depth}")
    vals = grid_batch(cfg, n, np.array([cfg.path]))[0]
    return GridRestriction(cfg.p, cfg.N, n, vals, cfg.prec)


def grid_batch(cfg: BrownianConfig, n: int, paths, prec: int | None = None) -> np.ndarray:
    """Partial sums A_C for level-n balls over many replicas: ``(paths, p**(N n), d)``."""
    prec = cfg.prec if prec is None else prec
    if cfg.p ** (cfg.N * n) > 2 ** 26:
        raise ValueError("grid too large to tabulate")
    return kernels.tree_sums(cfg.seed, kernels.STREAM_WEIGHT, np.asarray(paths, dtype=np.int64),
                             cfg.p, cfg.N, cfg.d, n, prec, cfg.carry)


def grid_representatives(p: int, N: int, m: int) -> np.ndarray:
    """One point per level-m ball (digits beyond m zero), in the total order."""
    return np.array([residues_of_index(i, p, N, m) for i in range(p ** (N * m))],
                    dtype=np.int64).reshape(-1, N)


# path-module constraints ---------------------------------------------------
@dataclass
class ModuleCheck:
    violations: int
    pairs: np.ndarray          # (P, 2) point indices
    pair_valuation: np.ndarray  # v(s - t) per pair
    equality_counts: np.ndarray  # paths with |X_s - X_t| == |s - t| / p, per pair
    norm_violations: int
    n_paths: int


def module_check(values: np.ndarray, points: np.ndarray, p: int, prec: int,
                 carry: bool) -> ModuleCheck:
    """Check |X_t| <= 1 and |X_s - X_t| <= |s - t|/p on all pairs of grid points.

    ``values`` has shape ``(paths, points, d)`` and holds residues mod p^prec.
    Pairs whose bound is below the tracked precision are compared as far as
    the digits go.
    """
    values = np.asarray(values, dtype=np.int64)
    points = np.asarray(points, dtype=np.int64)
    P = points.shape[0]
    ii, jj = np.triu_indices(P, k=1)
    pv = np.array([index_distance_valuation(points[i], points[j], p, prec) for i, j in zip(ii, jj)],
                  dtype=np.int64)
    diff = sub_mod(values[:, ii, :], values[:, jj, :], p, prec, carry)
    dv = valuation_mod(diff, p, prec).min(axis=2)
    bound = np.minimum(pv + 1, prec)
    violations = int((dv < bound[None, :]).sum())
    equal = (dv == (pv + 1)[None, :]).sum(axis=0)
    # residues always lie in D^d, so |X_t| <= 1 can only fail on malformed input
    norm_bad = int((values < 0).sum() + (values >= p ** prec).sum())
    return ModuleCheck(violations, np.stack([ii, jj], axis=1), pv, equal, norm_bad,
                       values.shape[0])


# hitting probabilities -----------------------------------------------------
def check_admissible(f: np.ndarray, p: int, N: int, m: int) -> None:
    """Raise :class:`OutsideSupportError` unless f (tree-ordered level-m grid values,
    mod p^(m+1)) satisfies |f(s) - f(t)| <= |s - t|/p."""
    f = np.asarray(f, dtype=np.int64).reshape(p ** (N * m), -1)
    for j in range(m):
        block = f.reshape(p ** (N * j), p ** (N * (m - j)), -1) % p ** (j + 1)
        if np.any(block != block[:, :1, :]):
            raise OutsideSupportError(
                f"grid function varies by more than p^-{j + 1} inside a level-{j} ball")


def hitting_prob_exact(p: int, N: int, d: int, m: int, f=None) -> Fraction:
    """P{sup_t |X_t - f(t)| <= p^-(m+1)} for an admissible f on the level-m grid."""
    count = p ** (N * m)
    if f is not None:
        check_admissible(f, p, N, m)
    reps = grid_representatives(p, N, m)
    log_p = -d * (m + 1) * count
    for i in range(1, count):
        v = index_distance_valuation(reps[i], reps[i - 1], p, m)
        log_p += d * (1 + v)  # (|t_i - t_{i-1}| / p)^-d = p^{d(1+v)}
    return Fraction(p) ** log_p


def hitting_indicator(cfg: BrownianConfig, m: int, paths, f=None) -> np.ndarray:
    """Per replica: does X stay within p^-(m+1) of f on the whole index space?"""
    vals = grid_batch(cfg, m, paths, prec=m + 1)
    target = 0 if f is None else (np.asarray(f, dtype=np.int64).reshape(1, -1, cfg.d)
                                  % cfg.p ** (m + 1))
    return np.all(vals == target, axis=(1, 2))


def hitting_prob_mc(cfg: BrownianConfig, m: int, reps: int, f=None, start: int = 0) -> MCEstimate:
    if f is not None:
        check_admissible(f, cfg.p, cfg.N, m)
    return mc_mean(hitting_indicator(cfg, m, cfg.paths(reps, start), f))


# law tests -----------------------------------------------------------------
def _ordered(points, p: int, depth: int) -> bool:
    vecs = [PadicVector.from_ints(list(pt), p, depth) for pt in points]
    return all(order_compare(a, b) == Order.LT for a, b in zip(vecs, vecs[1:]))


def increments(values: np.ndarray, p: int, prec: int, carry: bool) -> np.ndarray:
    """X(t_1), X(t_2) - X(t_1), ... along axis 1."""
    out = values.copy()
    out[:, 1:] = sub_mod(values[:, 1:], values[:, :-1], p, prec, carry)
    return out


def increments_test(cfg: BrownianConfig, points, reps: int, r: int,
                    check_order: bool = True, start: int = 0) -> list[TestReport]:
    """Independence of each increment from the one before it, on (D/p^r D)^d cells."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, cfg.N)
    if check_order and not _ordered(points, cfg.p, cfg.depth):
        raise ValueError("points are not increasing in the total order")
    if r > cfg.prec:
        raise ValueError("quotient level beyond tracked precision")
    if points.shape[0] < 2:
        return [TestReport("increments", 0.0, 0, 1.0, reps, seed=cfg.seed)]
    vals = evaluate_many(cfg, points, cfg.paths(reps, start))
    inc = increments(vals, cfg.p, cfg.prec, cfg.carry)
    return [chi_square_contingency(
        _pair_table(inc[:, i - 1], inc[:, i], cfg.p, r), name=f"increment-{i}", seed=cfg.seed)
        for i in range(1, points.shape[0])]


def _pair_table(u, v, p, r):
    cu, cv = quotient_cells(u, p, r), quotient_cells(v, p, r)
    ku, kv = int(cu.max()) + 1, int(cv.max()) + 1
    return np.bincount(cu * kv + cv, minlength=ku * kv).reshape(ku, kv)


def pair_law_test(cfg: BrownianConfig, t: Sequence[int], reps: int, start: int = 0) -> TestReport:
    """(X_0, X_t) against the uniform law on {|x| <= 1, |x - y| <= |t|/p}.

    Compared on the quotient one digit finer than the constraint, so the
    support is a proper subset of the cells.
    """
    t = np.asarray(t, dtype=np.int64).reshape(cfg.N)
    k = index_distance_valuation(t, np.zeros(cfg.N, dtype=np.int64), cfg.p, cfg.depth)
    r = k + 2
    if r > cfg.prec:
        raise ValueError(f"depth {cfg.depth} too shallow for |t| = p^-{k}")
    vals = evaluate_many(cfg, np.stack([np.zeros(cfg.N, dtype=np.int64), t]),
                         cfg.paths(reps, start))
    x, y = vals[:, 0] % cfg.p ** r, vals[:, 1] % cfg.p ** r
    cells_per = cfg.p ** (r * cfg.d)
    counts = np.bincount(quotient_cells(x, cfg.p, r) * cells_per + quotient_cells(y, cfg.p, r),
                         minlength=cells_per * cells_per)
    grid_x = np.array(np.unravel_index(np.arange(cells_per), (cfg.p ** r,) * cfg.d)).T
    diff = sub_mod(grid_x[:, None, :], grid_x[None, :, :], cfg.p, r, cfg.carry)
    support = np.all(diff % cfg.p ** (k + 1) == 0, axis=2).ravel()
    return chi_square_expected(counts, support.astype(float), name=f"pair-law-k{k}",
                               seed=cfg.seed)


def shift_test(cfg: BrownianConfig, s: Sequence[int], points, reps: int, r: int) -> TestReport:
    """Quotient law of (X(t_i))_i versus (X(s + t_i))_i, on disjoint replicas."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, cfg.N)
    plain = evaluate_many(cfg, points, cfg.paths(reps, 0))
    moved = ShiftedPath(cfg, tuple(int(x) for x in s)).evaluate_many(points,
                                                                      cfg.paths(reps, reps))
    cells = cfg.p ** (r * cfg.d * points.shape[0])
    ca = np.bincount(quotient_cells(plain.reshape(reps, -1), cfg.p, r), minlength=cells)
    cb = np.bincount(quotient_cells(moved.reshape(reps, -1), cfg.p, r), minlength=cells)
    return chi_square_homogeneity(ca, cb, name="shift", seed=cfg.seed)


def anchor_independence_test(cfg: BrownianConfig, t: Sequence[int], reps: int, r: int,
                             start: int = 0) -> TestReport:
    """X_0 against X_t - X_0 on quotient cells."""
    pts = np.stack([np.zeros(cfg.N, dtype=np.int64), np.asarray(t, dtype=np.int64)])
    vals = evaluate_many(cfg, pts, cfg.paths(reps, start))
    diff = sub_mod(vals[:, 1], vals[:, 0], cfg.p, cfg.prec, cfg.carry)
    return chi_square_contingency(_pair_table(vals[:, 0], diff, cfg.p, r),
                                  name="anchor-independence", seed=cfg.seed)


def ball_factorization_test(cfg: BrownianConfig, s: Sequence[int], inside: Sequence[int],
                            outside: Sequence[int], level: int, reps: int, r: int,
                            start: int = 0) -> TestReport:
    """(X_s, X_u) for s, u in a ball C against X_t - X_s for t outside C."""
    s, u, t = (np.asarray(x, dtype=np.int64) for x in (s, inside, outside))
    if index_distance_valuation(s, u, cfg.p, cfg.depth) < level:
        raise ValueError("inside point must share the level ball with s")
    if index_distance_valuation(s, t, cfg.p, cfg.depth) >= level:
        raise ValueError("outside point must leave the level ball of s")
    vals = evaluate_many(cfg, np.stack([s, u, t]), cfg.paths(reps, start))
    left = np.concatenate([vals[:, 0], vals[:, 1]], axis=1)
    right = sub_mod(vals[:, 2], vals[:, 0], cfg.p, cfg.prec, cfg.carry)
    return chi_square_contingency(_pair_table(left, right, cfg.p, r),
                                  name="ball-factorization", seed=cfg.seed)


def with_path(cfg: BrownianConfig, path: int) -> BrownianConfig:
    return replace(cfg, path=path)
