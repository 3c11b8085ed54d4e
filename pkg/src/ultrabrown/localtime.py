"""Zero sets and local time at 0: survival probability, branching structure, dilation.

A level-n ball C can still contain a zero of X only if its partial sum A_C
(weights of levels 0..n) satisfies |A_C| <= p^-(n+1); otherwise the
isosceles property keeps X away from 0 on all of C.  These "candidate"
balls form a branching tree: every candidate has p^N children, each of
which contains a zero independently with probability h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .brownian import BrownianConfig, grid_batch
from .gaussian import quotient_cells
from .padic import BallAddress
from .stats import MCEstimate, TestReport, chi_square_expected, mc_mean

_NEWTON_TOL = 1e-15


@dataclass(frozen=True)
class SurvivalParams:
    p: int
    N: int
    d: int
    h: float
    Q: dict[int, Fraction] = field(default_factory=dict)
    residual: float = 0.0
    iterations: int = 0

    @property
    def fan(self) -> int:
        return self.p ** self.N

    @property
    def mean_offspring(self) -> Fraction:
        """p^(N-d), the growth rate of surviving lines."""
        return Fraction(self.p) ** (self.N - self.d)

    def q_mean(self) -> Fraction:
        return sum((i * q for i, q in self.Q.items()), Fraction(0))

    def q_array(self) -> np.ndarray:
        """Q as floats indexed 0..p^N (index 0 always zero)."""
        out = np.zeros(self.fan + 1)
        for i, q in self.Q.items():
            out[i] = float(q)
        return out


def survival_residual(p: int, N: int, d: int, h: float) -> float:
    q = float(p) ** -d
    return abs((1 - h) - ((1 - q) + q * (1 - h) ** (p ** N)))


def offspring_law(fan: int, h: Fraction | float) -> dict[int, Fraction]:
    """Binomial(fan, h) conditioned to be at least 1, exactly in rationals."""
    h = Fraction(h)
    if h == 0:
        return {}
    norm = 1 - (1 - h) ** fan
    return {i: math.comb(fan, i) * h ** i * (1 - h) ** (fan - i) / norm
            for i in range(1, fan + 1)}


def solve_survival(p: int, N: int, d: int) -> SurvivalParams:
    """Probability h that X hits 0, and the offspring law of surviving balls.

    Newton iteration on y = 1 - h from y = 0 for
    y = (1 - p^-d) + p^-d y^(p^N); the iterates increase to the smallest
    root.  When N <= d that root is y = 1, so h = 0.
    """
    if N <= d:
        return SurvivalParams(p, N, d, 0.0, {}, 0.0, 0)
    q = float(p) ** -d
    fan = p ** N
    y = 0.0
    it = 0
    for it in range(1, 200):
        f = (1 - q) + q * y ** fan - y
        df = q * fan * y ** (fan - 1) - 1
        step = f / df
        y -= step
        if abs(step) < _NEWTON_TOL:
            break
    h = 1.0 - y
    return SurvivalParams(p, N, d, h, offspring_law(fan, h), survival_residual(p, N, d, h), it)


def finite_horizon_survival(p: int, N: int, d: int, levels: int) -> list[Fraction]:
    """h_j = P{some level-j candidate below the root}, j = 0..levels, exactly."""
    q = Fraction(1, p ** d)
    hs = [q]
    for _ in range(levels):
        hs.append(q * (1 - (1 - hs[-1]) ** (p ** N)))
    return hs


def gw_simulate(sp: SurvivalParams, generations: int, runs: int, seed: int = 0) -> np.ndarray:
    """Galton-Watson sizes V_0 = 1, V_1, ..., V_generations with offspring law Q.

    Returns an integer array of shape ``(runs, generations + 1)``.
    """
    if not sp.Q:
        raise ValueError("offspring law is empty (h = 0)")
    pv = sp.q_array()[1:]
    pv = pv / pv.sum()
    sizes = np.arange(1, pv.size + 1, dtype=np.int64)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, kernels.STREAM_GW])))
    out = np.ones((runs, generations + 1), dtype=np.int64)
    for g in range(1, generations + 1):
        counts = rng.multinomial(out[:, g - 1], pv)
        out[:, g] = counts @ sizes
    return out


# candidates on simulated paths ---------------------------------------------
@dataclass(frozen=True, eq=False)
class CandidateSet:
    p: int
    N: int
    level: int
    indices: np.ndarray

    def addresses(self) -> list[BallAddress]:
        return [BallAddress.from_index(int(i), self.p, self.N, self.level) for i in self.indices]

    def __len__(self) -> int:
        return int(self.indices.size)


def _candidate_mask(cfg: BrownianConfig, n: int, paths) -> np.ndarray:
    vals = grid_batch(cfg, n, paths, prec=n + 1)
    return np.all(vals % cfg.p ** (n + 1) == 0, axis=2)


def candidates(cfg: BrownianConfig, n: int) -> CandidateSet:
    """Level-n balls with |A_C| <= p^-(n+1), for replica ``cfg.path``."""
    if n + 1 > cfg.depth:
        raise ValueError(f"need depth >= {n + 1} for level-{n} candidates")
    mask = _candidate_mask(cfg, n, np.array([cfg.path]))[0]
    return CandidateSet(cfg.p, cfg.N, n, np.nonzero(mask)[0])


def nesting_violations(cfg: BrownianConfig, n: int, paths) -> int:
    """Level-(n+1) candidates whose parent is not a level-n candidate."""
    outer = _candidate_mask(cfg, n, paths)
    inner = _candidate_mask(cfg, n + 1, paths)
    parent_ok = np.repeat(outer, cfg.p ** cfg.N, axis=1)
    return int((inner & ~parent_ok).sum())


@dataclass
class CandidateStats:
    counts: np.ndarray      # (reps, m+1) candidates per level
    surviving: np.ndarray   # (reps, m+1) balls per level containing a level-m candidate
    offspring: np.ndarray   # (reps, max(m,1), p^N+1) child-count histograms of surviving balls
    m: int


def candidate_stats(cfg: BrownianConfig, m: int, reps: int, start: int = 0) -> CandidateStats:
    """Lazy candidate descent to level m for ``reps`` replicas."""
    if cfg.p ** (m + 1) >= 2 ** 62:
        raise ValueError("level too deep for 64-bit residues")
    c, s, o = kernels.candidate_walk(cfg.seed, kernels.STREAM_WEIGHT, cfg.paths(reps, start),
                                     cfg.p, cfg.N, cfg.d, m, cfg.carry)
    return CandidateStats(c, s, o, m)


def expected_candidates(p: int, N: int, d: int, n: int) -> Fraction:
    return Fraction(p) ** (N * n - d * (n + 1))


# dilation estimator ---------------------------------------------------------
def dilation_estimate(cfg: BrownianConfig, n: int, m: int) -> dict[int, float]:
    """Mass p^(dn) p^(-Nn) on each level-n ball holding a level-m candidate (tree index keys)."""
    if m < n:
        raise ValueError("m must be at least n")
    if m + 1 > cfg.depth:
        raise ValueError(f"need depth >= {m + 1}")
    cand = candidates(cfg, m)
    span = cfg.p ** (cfg.N * (m - n))
    balls = np.unique(cand.indices // span)
    w = float(cfg.p) ** ((cfg.d - cfg.N) * n)
    return {int(b): w for b in balls}


def dilation_total_mass(cfg: BrownianConfig, n: int, m: int, reps: int,
                        start: int = 0) -> np.ndarray:
    """Total mass of the level-(n, m) dilation estimate for each replica."""
    if m < n:
        raise ValueError("m must be at least n")
    st = candidate_stats(cfg, m, reps, start)
    return st.surviving[:, n] * float(cfg.p) ** ((cfg.d - cfg.N) * n)


def offspring_test(stats: CandidateStats, p: int, N: int, d: int, level: int,
                   law: dict[int, Fraction] | None = None) -> TestReport:
    """Child counts of surviving level-``level`` balls against an offspring law.

    By default the exact finite-horizon law Binomial(p^N, h_j) given >= 1 with
    j = m - level - 1 is used; pass ``law`` to compare with Q itself.
    """
    if not 0 <= level < stats.m:
        raise ValueError("level must lie below the walk depth")
    if law is None:
        hj = finite_horizon_survival(p, N, d, stats.m)[stats.m - level - 1]
        law = offspring_law(p ** N, hj)
    hist = stats.offspring[:, level, :].sum(axis=0)
    probs = np.zeros(hist.size)
    for i, q in law.items():
        probs[i] = float(q)
    # merge sparse upper cells so every expected count reaches 5
    n = hist.sum()
    order = list(range(1, hist.size))
    cells_c, cells_p, acc_c, acc_p = [], [], 0.0, 0.0
    for i in order:
        acc_c += hist[i]
        acc_p += probs[i]
        if acc_p * n >= 5:
            cells_c.append(acc_c)
            cells_p.append(acc_p)
            acc_c = acc_p = 0.0
    if acc_p > 0 or acc_c > 0:
        if cells_p:
            cells_c[-1] += acc_c
            cells_p[-1] += acc_p
        else:
            cells_c.append(acc_c)
            cells_p.append(acc_p)
    return chi_square_expected(cells_c, cells_p, name=f"offspring-level-{level}")


def f_measure_cover(cfg: BrownianConfig, n: int, m: int) -> float:
    """Exploratory: sum of f(p^-n) over level-n balls holding a level-m candidate,
    f(r) = r^(N-d) (log|log r|)^(d/N).  No limit constant is claimed."""
    if n < 2:
        raise ValueError("f needs log|log r| > 0, i.e. n >= 2")
    r = float(cfg.p) ** -n
    f = r ** (cfg.N - cfg.d) * math.log(abs(math.log(r))) ** (cfg.d / cfg.N)
    return f * len(dilation_estimate(cfg, n, m))


# occupation field -----------------------------------------------------------
@dataclass(frozen=True, eq=False)
class LocalTimeField:
    """Occupation density of X over value cells x + p^r D^d, using the level-n grid.

    ``density[c]`` = p^(dr) * lambda{t : X_t in cell c}; the densities times
    the cell volume p^(-dr) sum to 1.
    """
    p: int
    d: int
    n: int
    r: int
    density: np.ndarray

    def masses(self) -> np.ndarray:
        return self.density * float(self.p) ** (-self.d * self.r)

    def total(self) -> float:
        return float(self.masses().sum())


def local_time_field_batch(cfg: BrownianConfig, n: int, r: int, paths) -> np.ndarray:
    """Densities for many replicas: ``(paths, p^(r d))``."""
    if r > n:
        raise ValueError("value resolution r must not exceed the grid level n")
    vals = grid_batch(cfg, n, paths, prec=max(r, 1))
    cells = quotient_cells(vals.reshape(-1, cfg.d), cfg.p, r).reshape(vals.shape[0], -1)
    ncell = cfg.p ** (r * cfg.d)
    counts = np.stack([np.bincount(row, minlength=ncell) for row in cells])
    return counts * (float(cfg.p) ** (cfg.d * r - cfg.N * n))


def local_time_field(cfg: BrownianConfig, n: int, r: int) -> LocalTimeField:
    dens = local_time_field_batch(cfg, n, r, np.array([cfg.path]))[0]
    return LocalTimeField(cfg.p, cfg.d, n, r, dens)


def occupation_totals(cfg: BrownianConfig, n: int, r: int, paths) -> np.ndarray:
    dens = local_time_field_batch(cfg, n, r, paths)
    return dens.sum(axis=1) * float(cfg.p) ** (-cfg.d * r)


def gw_normalised(V: np.ndarray, sp: SurvivalParams) -> np.ndarray:
    """V_n / p^((N-d) n), the martingale with the Harris limit."""
    g = np.arange(V.shape[1])
    return V / float(sp.mean_offspring) ** g


def gw_mean_check(sp: SurvivalParams, generations: int, runs: int, seed: int = 0) -> MCEstimate:
    V = gw_simulate(sp, generations, runs, seed)
    return mc_mean(V[:, -1] / float(sp.mean_offspring) ** generations)
