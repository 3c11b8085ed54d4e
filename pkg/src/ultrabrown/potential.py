"""Riesz kernel, energies, capacities, and the martingale approximants of random measures.

Points of D^d are integer residue vectors modulo ``p**prec``.  Distances are
|x - y| = p^-v with v the first differing digit, which is the same under
carry and digit-wise subtraction.

The approximant of a homogeneous random measure with characteristic measure
mu is kappa_n(B) = integral over B of (phi_n * mu)(X_t) dt, where
(phi_n * mu)(x) = p^(d n) mu(x + p^n D^d).  Since X mod p^n is constant on
level-n balls, kappa_n is an exact finite sum over the level-n grid.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .brownian import BrownianConfig, grid_batch, grid_representatives, sub_mod, valuation_mod
from .gaussian import quotient_cells
from .padic import BallAddress, tree_index, vp
from .stats import MCEstimate, mc_mean, within_band

INF = math.inf
Extended = Fraction | float  # float only ever holds INF


@dataclass(frozen=True)
class KernelParams:
    p: int
    N: int
    d: int

    @property
    def scale(self) -> Fraction:
        """Leading constant (1 - p^-N) / p^d of the kernel."""
        return (1 - Fraction(1, self.p ** self.N)) / self.p ** self.d

    @property
    def finite_at_zero(self) -> bool:
        return self.N > self.d


def riesz_kernel(kp: KernelParams, r: Fraction | int) -> Extended:
    """u(r) for r in {p^-k} or r = 0; INF at 0 when N <= d."""
    r = Fraction(r)
    p, N, d = kp.p, kp.N, kp.d
    if r == 0:
        if N <= d:
            return INF
        return kp.scale / (1 - Fraction(p) ** (d - N))
    k = -vp(r.numerator, p) + vp(r.denominator, p)
    if r != Fraction(p) ** (-k) or k < 0:
        raise ValueError(f"radius must be a nonpositive power of 1/{p}, got {r}")
    if N == d:
        return kp.scale * k
    return kp.scale * (Fraction(p) ** (k * (d - N)) - 1) / (Fraction(p) ** (d - N) - 1)


def riesz_kernel_series(kp: KernelParams, k: int) -> Fraction:
    """u(p^-k) summed level by level: scale * sum_{j<k} p^{j(d-N)}."""
    return kp.scale * sum(Fraction(kp.p) ** (j * (kp.d - kp.N)) for j in range(k))


def pair_density_scale(kp: KernelParams) -> int:
    """Factor p^(2d) relating the kernel above to the one implied by the pair density of
    (X_0, X_t); see the second-moment check."""
    return kp.p ** (2 * kp.d)


def smoothed_kernel_at_zero(kp: KernelParams, n: int) -> Extended:
    """(phi_n * v)(0) with v(z) = u(|z|): the kernel averaged over p^n D^d."""
    p, N, d = kp.p, kp.N, kp.d
    q = Fraction(p)
    if N > d:
        u0 = riesz_kernel(kp, 0)
        return u0 * (1 - (1 - q ** -d) * q ** (n * (d - N)) / (1 - q ** -N))
    if N == d:
        return kp.scale * (n + q ** -d / (1 - q ** -d))
    return kp.scale / (q ** (d - N) - 1) * ((1 - q ** -d) * q ** (n * (d - N)) / (1 - q ** -N) - 1)


def smoothed_kernel(kp: KernelParams, n: int, v: int | float) -> Extended:
    """(phi_n * v)(z) for |z| = p^-v (v = INF for z = 0)."""
    if v < n:
        return riesz_kernel(kp, Fraction(1, kp.p ** int(v)))
    return smoothed_kernel_at_zero(kp, n)


# measures ------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finitely many atoms in D^d: integer residue points mod p^prec with masses >= 0."""
    p: int
    prec: int
    points: np.ndarray
    masses: tuple[Fraction, ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.ndim != 2:
            pts = pts.reshape(len(self.masses), -1)
        if pts.shape[0] != len(self.masses):
            raise ValueError("one mass per atom")
        object.__setattr__(self, "points", pts % self.p ** self.prec)
        object.__setattr__(self, "masses", tuple(Fraction(m) for m in self.masses))
        if any(m < 0 for m in self.masses):
            raise ValueError("masses must be nonnegative")
        if len({tuple(r) for r in self.points.tolist()}) != len(self.masses):
            raise ValueError("atoms must be distinct at the given precision")

    @classmethod
    def point_mass(cls, p: int, d: int, prec: int, point=None, mass=1) -> "AtomicMeasure":
        pt = np.zeros((1, d), dtype=np.int64) if point is None else np.asarray(point).reshape(1, d)
        return cls(p, prec, pt, (Fraction(mass),))

    @classmethod
    def zero(cls, p: int, d: int, prec: int) -> "AtomicMeasure":
        return cls(p, prec, np.zeros((0, d), dtype=np.int64), ())

    @classmethod
    def uniform(cls, p: int, prec: int, points, total=1) -> "AtomicMeasure":
        points = np.asarray(points, dtype=np.int64)
        n = points.shape[0]
        return cls(p, prec, points, tuple(Fraction(total, n) for _ in range(n)))

    @classmethod
    def uniform_on_ball(cls, p: int, d: int, center, level: int, resolution: int,
                        total=1) -> "AtomicMeasure":
        """Equal atoms at every point of center + p^level D^d with digits below ``resolution``."""
        if resolution < level:
            raise ValueError("resolution must be at least the ball level")
        center = np.asarray(center, dtype=np.int64).reshape(d) % p ** level
        offs = np.array(list(itertools.product(range(p ** (resolution - level)), repeat=d)),
                        dtype=np.int64).reshape(-1, d)
        return cls.uniform(p, resolution, center + offs * p ** level, total)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> Fraction:
        return sum(self.masses, Fraction(0))

    def scaled(self, c) -> "AtomicMeasure":
        return AtomicMeasure(self.p, self.prec, self.points, tuple(Fraction(c) * m for m in self.masses))

    def cell_masses(self, n: int) -> dict[int, Fraction]:
        """mu of each cell x + p^n D^d, keyed by quotient cell id."""
        if n > self.prec:
            raise ValueError("cells finer than the atom precision")
        out: dict[int, Fraction] = {}
        if not self.masses:
            return out
        for cell, m in zip(quotient_cells(self.points, self.p, n).tolist(), self.masses):
            out[cell] = out.get(cell, Fraction(0)) + m
        return out

    def to_json(self) -> dict:
        return {"p": self.p, "prec": self.prec, "d": self.d,
                "atoms": [{"point": pt, "mass": str(m)} for pt, m in
                          zip(self.points.tolist(), self.masses)]}

    @classmethod
    def from_json(cls, obj: dict | str) -> "AtomicMeasure":
        if isinstance(obj, str):
            obj = json.loads(obj)
        atoms = obj["atoms"]
        d = len(atoms[0]["point"]) if atoms else obj.get("d", 1)
        pts = np.array([a["point"] for a in atoms], dtype=np.int64).reshape(len(atoms), d)
        return cls(obj["p"], obj["prec"], pts, tuple(Fraction(a["mass"]) for a in atoms))


def distance_valuations(points_a, points_b, p: int, prec: int) -> np.ndarray:
    """v(x - y) for all pairs, with ``prec`` standing for 'equal at this precision'."""
    a = np.asarray(points_a, dtype=np.int64)
    b = np.asarray(points_b, dtype=np.int64)
    diff = (a[:, None, :] - b[None, :, :]) % p ** prec
    return valuation_mod(diff, p, prec).min(axis=2)


def kernel_matrix(kp: KernelParams, points, prec: int) -> list[list[Extended]]:
    """Exact u(|x_i - x_j|); coincident points give u(0)."""
    v = distance_valuations(points, points, kp.p, prec)
    cache: dict[int, Extended] = {}

    def entry(val: int) -> Extended:
        if val not in cache:
            cache[val] = riesz_kernel(kp, 0 if val >= prec else Fraction(1, kp.p ** val))
        return cache[val]

    return [[entry(int(x)) for x in row] for row in v]


def _check_measure(kp: KernelParams, mu: AtomicMeasure) -> None:
    if mu.p != kp.p:
        raise ValueError("measure and kernel use different primes")
    if mu.masses and mu.d != kp.d:
        raise ValueError("measure lives in the wrong dimension")


def energy(kp: KernelParams, mu: AtomicMeasure) -> Extended:
    """Double sum of u(|x - y|) mu(dx) mu(dy); INF when a charged atom sits on u(0) = INF."""
    _check_measure(kp, mu)
    if not mu.masses or mu.total_mass == 0:
        return Fraction(0)
    if not kp.finite_at_zero and any(m > 0 for m in mu.masses):
        return INF
    K = kernel_matrix(kp, mu.points, mu.prec)
    m = mu.masses
    return sum((m[i] * m[j] * K[i][j] for i in range(len(m)) for j in range(len(m))),
               Fraction(0))


def potential(kp: KernelParams, mu: AtomicMeasure, x) -> Extended:
    """Integral of u(|x - y|) mu(dy) at a point x."""
    _check_measure(kp, mu)
    x = np.asarray(x, dtype=np.int64).reshape(1, -1)
    if not mu.masses:
        return Fraction(0)
    v = distance_valuations(x, mu.points, kp.p, mu.prec)[0]
    total: Extended = Fraction(0)
    for val, m in zip(v.tolist(), mu.masses):
        if m == 0:
            continue
        u = riesz_kernel(kp, 0 if val >= mu.prec else Fraction(1, kp.p ** val))
        if u == INF:
            return INF
        total += m * u
    return total


@dataclass
class SupCheck:
    sup_probes: Extended
    sup_support: Extended
    argmax_probe: int

    @property
    def passed(self) -> bool:
        return self.sup_probes <= self.sup_support


def potential_sup_check(kp: KernelParams, mu: AtomicMeasure, probes) -> SupCheck:
    """Compare the largest potential over probe points with the largest over the atoms."""
    probes = np.asarray(probes, dtype=np.int64).reshape(-1, kp.d)
    charged = [pt for pt, m in zip(mu.points, mu.masses) if m > 0]
    pots = [potential(kp, mu, x) for x in probes]
    sup_support = max((potential(kp, mu, x) for x in charged), default=Fraction(0))
    best = int(np.argmax([float(v) for v in pots])) if pots else -1
    return SupCheck(max(pots, default=Fraction(0)), sup_support, best)


# equilibrium ---------------------------------------------------------------
def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


@dataclass
class EquilibriumResult:
    masses: np.ndarray
    energy: float
    capacity: float
    iterations: int
    converged: bool
    gradient_norm: float

    def to_json(self) -> dict:
        return {"masses": self.masses.tolist(), "energy": self.energy, "capacity": self.capacity,
                "iterations": self.iterations, "converged": self.converged,
                "gradient_norm": self.gradient_norm}


def equilibrium(kp: KernelParams, points, prec: int, tol: float = 1e-10,
                max_iter: int = 100_000) -> EquilibriumResult:
    """Minimise the energy over probability measures on the given points.

    Projected gradient on the simplex for the objective m^T U m / 2 with step
    1/L, L the largest row sum of U, started from the barycentre.  The
    reported minimum carries no uniqueness claim.  With u(0) = INF every
    candidate has infinite energy and the capacity is 0.
    """
    points = np.asarray(points, dtype=np.int64).reshape(-1, kp.d)
    n = points.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    bary = np.full(n, 1.0 / n)
    if not kp.finite_at_zero:
        return EquilibriumResult(bary, INF, 0.0, 0, True, 0.0)
    U = np.array([[float(x) for x in row] for row in kernel_matrix(kp, points, prec)])
    L = float(U.sum(axis=1).max())
    m = bary
    gnorm = INF
    it = 0
    for it in range(1, max_iter + 1):
        nxt = project_simplex(m - (U @ m) / L)
        gnorm = float(np.linalg.norm(nxt - m) * L)
        m = nxt
        if gnorm < tol:
            break
    e = float(m @ U @ m)
    return EquilibriumResult(m, e, 1.0 / e if e > 0 else INF, it, gnorm < tol, gnorm)


def brute_force_equilibrium(kp: KernelParams, points, prec: int, step: float = 1e-3):
    """Grid search over the simplex (two or three points); returns (masses, energy)."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, kp.d)
    U = np.array([[float(x) for x in row] for row in kernel_matrix(kp, points, prec)])
    ticks = np.round(np.arange(0, 1 + step / 2, step), 12)
    if points.shape[0] == 2:
        cand = np.stack([ticks, 1 - ticks], axis=1)
    elif points.shape[0] == 3:
        a, b = np.meshgrid(ticks, ticks, indexing="ij")
        keep = a + b <= 1 + 1e-12
        cand = np.stack([a[keep], b[keep], 1 - a[keep] - b[keep]], axis=1)
    else:
        raise ValueError("brute force supports two or three points")
    e = np.einsum("ki,ij,kj->k", cand, U, cand)
    best = int(np.argmin(e))
    return cand[best], float(e[best])


def capacity(kp: KernelParams, points, prec: int) -> float:
    return equilibrium(kp, points, prec).capacity


def is_polar(kp: KernelParams, points, prec: int) -> bool:
    """A finite set is polar exactly when no probability measure on it has finite energy."""
    return capacity(kp, points, prec) == 0.0


# approximants of random measures ---------------------------------------------
def _density_lookup(mu: AtomicMeasure, n: int) -> tuple[np.ndarray, np.ndarray]:
    cells = mu.cell_masses(n)
    keys = np.array(sorted(cells), dtype=np.int64)
    vals = np.array([float(cells[k]) * mu.p ** (mu.d * n) for k in keys.tolist()])
    return keys, vals


def smoothed_density(mu: AtomicMeasure, values: np.ndarray, n: int) -> np.ndarray:
    """(phi_n * mu)(x) at residue vectors x (last axis = coordinates)."""
    keys, vals = _density_lookup(mu, n)
    shape = values.shape[:-1]
    cells = quotient_cells(values.reshape(-1, values.shape[-1]), mu.p, n)
    if keys.size == 0:
        return np.zeros(shape)
    pos = np.clip(np.searchsorted(keys, cells), 0, keys.size - 1)
    hit = keys[pos] == cells
    return np.where(hit, vals[pos], 0.0).reshape(shape)


def ball_mask(balls: Sequence[BallAddress] | None, p: int, N: int, n: int) -> np.ndarray:
    """Which level-n balls lie in the union ``balls`` (None means all of D^N)."""
    mask = np.zeros(p ** (N * n), dtype=bool)
    if balls is None:
        mask[:] = True
        return mask
    for b in balls:
        if b.level > n:
            raise ValueError("set must be a union of balls of level <= n")
        span = p ** (N * (n - b.level))
        mask[b.index * span:(b.index + 1) * span] = True
    return mask


def approximant_mass(cfg: BrownianConfig, mu: AtomicMeasure, n: int, paths=None,
                     balls: Sequence[BallAddress] | None = None) -> np.ndarray:
    """kappa_n(B) for each replica (B = union of ``balls``; default D^N)."""
    if mu.d != cfg.d or mu.p != cfg.p:
        raise ValueError("measure does not match the process")
    paths = np.array([cfg.path]) if paths is None else np.asarray(paths, dtype=np.int64)
    if not mu.masses or mu.total_mass == 0:
        return np.zeros(paths.shape[0])
    vals = grid_batch(cfg, n, paths, prec=n)
    dens = smoothed_density(mu, vals, n)
    mask = ball_mask(balls, cfg.p, cfg.N, n)
    return dens[:, mask].sum(axis=1) * float(cfg.p) ** (-cfg.N * n)


def smoothed_energy(kp: KernelParams, mu: AtomicMeasure, n: int) -> Extended:
    """Double sum of (phi_n * v)(x - y) mu(dx) mu(dy); increases to the energy."""
    _check_measure(kp, mu)
    if not mu.masses:
        return Fraction(0)
    v = distance_valuations(mu.points, mu.points, kp.p, mu.prec)
    if n > mu.prec:
        raise ValueError("smoothing finer than the atom precision")
    total: Extended = Fraction(0)
    for i, mi in enumerate(mu.masses):
        for j, mj in enumerate(mu.masses):
            vij = int(v[i, j])
            total += mi * mj * smoothed_kernel(kp, n, INF if vij >= mu.prec else vij)
    return total


def truncated_target(kp: KernelParams, mu: AtomicMeasure, n: int) -> Extended:
    return smoothed_energy(kp, mu, n)


@dataclass
class SecondMomentReport:
    n: int
    second_moment: MCEstimate
    first_moment: MCEstimate
    target: Extended           # smoothed energy with the kernel as defined
    pair_density_target: Extended  # same with the kernel implied by the pair density
    limit: Extended
    total_mass: Fraction

    def to_json(self) -> dict:
        f = lambda x: float(x)  # noqa: E731
        return {"n": self.n, "second_moment": self.second_moment.to_json(),
                "first_moment": self.first_moment.to_json(), "target": f(self.target),
                "pair_density_target": f(self.pair_density_target), "limit": f(self.limit),
                "total_mass": float(self.total_mass),
                "matches_target": self.second_moment.within(float(self.target)),
                "matches_pair_density_target":
                    self.second_moment.within(float(self.pair_density_target)),
                "mean_matches_mass": self.first_moment.within(float(self.total_mass))}


def second_moment_check(cfg: BrownianConfig, mu: AtomicMeasure, n: int, reps: int,
                        start: int = 0) -> SecondMomentReport:
    """Monte Carlo E[kappa_n(D^N)^2] and E[kappa_n(D^N)] against their exact values.

    Two exact targets are reported: the smoothed energy for the kernel u as
    defined here, and the same quantity for the kernel obtained by
    integrating the pair density of (X_0, X_t), which is p^(2d) times larger.
    The second one is what the simulation converges to.
    """
    kp = KernelParams(cfg.p, cfg.N, cfg.d)
    k = approximant_mass(cfg, mu, n, cfg.paths(reps, start))
    target = smoothed_energy(kp, mu, n)
    scale = pair_density_scale(kp)
    return SecondMomentReport(n, mc_mean(k * k), mc_mean(k), target,
                              target * scale if target != INF else INF,
                              energy(kp, mu), mu.total_mass)


@dataclass
class MartingaleReport:
    n: int
    mean_gap: MCEstimate          # kappa_{n+1}(B) - kappa_n(B) over all coupled draws
    slope: float                  # regression of the conditional mean on kappa_n
    outer_z: np.ndarray           # per-outer standardized gaps
    max_abs_z: float

    @property
    def passed(self) -> bool:
        return self.mean_gap.within(0.0)

    def to_json(self) -> dict:
        return {"n": self.n, "mean_gap": self.mean_gap.to_json(), "slope": self.slope,
                "max_abs_z": self.max_abs_z, "pass": self.passed}


def martingale_check(cfg: BrownianConfig, mu: AtomicMeasure, n: int, outer: int, inner: int,
                     balls: Sequence[BallAddress] | None = None) -> MartingaleReport:
    """Coupled check of E[kappa_{n+1}(B) | first n levels] = kappa_n(B).

    Weights above level n are shared within each outer replica; weights at
    levels >= n are redrawn ``inner`` times under fresh keys.
    """
    outer_paths = cfg.paths(outer)
    base = kappa_outer = approximant_mass(cfg, mu, n, outer_paths, balls)
    paths = np.repeat(outer_paths, inner)
    alt = (np.int64(1) << 40) + np.arange(outer * inner, dtype=np.int64) + cfg.path * inner
    vals = kernels.tree_sums(cfg.seed, kernels.STREAM_WEIGHT, paths, cfg.p, cfg.N, cfg.d, n + 1,
                             n + 1, cfg.carry, split=n, alt_paths=alt)
    dens = smoothed_density(mu, vals, n + 1)
    mask = ball_mask(balls, cfg.p, cfg.N, n + 1)
    k_next = (dens[:, mask].sum(axis=1) * float(cfg.p) ** (-cfg.N * (n + 1))).reshape(outer, inner)
    gaps = k_next - base[:, None]
    cond_mean = k_next.mean(axis=1)
    sd = k_next.std(axis=1, ddof=1) if inner > 1 else np.full(outer, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, (cond_mean - kappa_outer) / (sd / math.sqrt(inner)), 0.0)
    var = np.var(kappa_outer)
    slope = float(np.cov(kappa_outer, cond_mean)[0, 1] / var) if var > 0 else 1.0
    return MartingaleReport(n, mc_mean(gaps.mean(axis=1)), slope, z, float(np.abs(z).max()))


# Palm formula ----------------------------------------------------------------
@dataclass(frozen=True)
class CylinderFunctional:
    """F(f) = G(f(t_1), ..., f(t_k) mod p^r); G maps (..., k, d) residue arrays to reals."""
    points: np.ndarray
    r: int
    G: Callable[[np.ndarray], np.ndarray]


def norm_at_most(k: int, p: int, level: int):
    """G for F(f) = 1{|f(t_k)| <= p^-level} on the k-th point."""
    def G(vals: np.ndarray) -> np.ndarray:
        return np.all(vals[..., k, :] % p ** level == 0, axis=-1).astype(float)
    return G


def _shift_indices(p: int, N: int, L: int, shift) -> np.ndarray:
    reps = grid_representatives(p, N, L)
    moved = (reps + np.asarray(shift, dtype=np.int64)) % p ** L
    return np.array([tree_index(row, p, L) for row in moved.tolist()], dtype=np.int64)


def quotient_law_of_W(p: int, N: int, d: int, points, r: int) -> dict[tuple, Fraction]:
    """Exact law of (W(t_1), ..., W(t_k)) mod p^r.

    W sums the weights of all balls avoiding 0, so only balls at levels
    below r that contain some t_i but not 0 matter.
    """
    points = [tuple(int(c) for c in pt) for pt in np.asarray(points).reshape(-1, N)]
    mod = p ** r
    law: dict[tuple, Fraction] = {tuple((0,) * d for _ in points): Fraction(1)}
    for level in range(r):
        groups: dict[int, list[int]] = {}
        for i, pt in enumerate(points):
            idx = tree_index(pt, p, level)
            if idx != 0:
                groups.setdefault(idx, []).append(i)
        for members in groups.values():
            vals = list(itertools.product(range(0, mod, p ** level), repeat=d))
            w = Fraction(1, len(vals))
            nxt: dict[tuple, Fraction] = {}
            for state, pr in law.items():
                for z in vals:
                    st = list(state)
                    for i in members:
                        st[i] = tuple((a + b) % mod for a, b in zip(st[i], z))
                    key = tuple(st)
                    nxt[key] = nxt.get(key, Fraction(0)) + pr * w
            law = nxt
    return law


@dataclass
class PalmReport:
    lhs: MCEstimate
    rhs: float          # exact value at smoothing level n
    rhs_limit: float    # exact value for mu itself
    n: int

    @property
    def diff(self) -> float:
        return self.lhs.mean - self.rhs

    @property
    def passed(self) -> bool:
        return self.lhs.within(self.rhs)

    def to_json(self) -> dict:
        return {"lhs": self.lhs.to_json(), "rhs": self.rhs, "rhs_limit": self.rhs_limit,
                "n": self.n, "diff": self.diff, "pass": self.passed}


def palm_check(cfg: BrownianConfig, mu: AtomicMeasure, F: CylinderFunctional, n: int,
               reps: int, start: int = 0) -> PalmReport:
    """Both sides of the Palm identity for the approximant kappa_n.

    Left: Monte Carlo of the integral of F(X o theta_t) kappa_n(dt), computed
    exactly per path on level-L balls with L = max(n, r - 1).
    Right: integral of E[F(x + W)] against (phi_n * mu)(x) dx, by enumeration.
    """
    p, N, d, r = cfg.p, cfg.N, cfg.d, F.r
    pts = np.asarray(F.points, dtype=np.int64).reshape(-1, N)
    L = max(n, r - 1)
    prec = max(n, r)
    if not mu.masses or mu.total_mass == 0:
        zero = MCEstimate(0.0, 0.0, reps)
        return PalmReport(zero, 0.0, 0.0, n)
    vals = grid_batch(cfg, L, cfg.paths(reps, start), prec=prec)
    dens = smoothed_density(mu, vals, n)
    shifted = np.stack([vals[:, _shift_indices(p, N, L, t), :] for t in pts], axis=2)
    g = F.G(shifted % p ** r)
    lhs = (g * dens).sum(axis=1) * float(p) ** (-N * L)

    law = quotient_law_of_W(p, N, d, pts, r)
    M = max(n, r)
    cells = mu.cell_masses(n)
    rhs = 0.0
    # x runs over D^d mod p^M; only cells of positive phi_n * mu contribute
    for cell, m in cells.items():
        base = np.array(np.unravel_index(cell, (p ** n,) * d)).reshape(d) if n > 0 \
            else np.zeros(d, dtype=np.int64)
        fine = np.array(list(itertools.product(range(p ** (M - n)), repeat=d)),
                        dtype=np.int64).reshape(-1, d)
        xs = (base + fine * p ** n) % p ** M
        weight = float(m) * p ** (d * n) * float(p) ** (-d * M)
        for state, pr in law.items():
            w = np.array(state, dtype=np.int64)  # (k, d)
            rhs += weight * float(pr) * float(F.G((xs[:, None, :] + w[None]) % p ** r).sum())
    rhs_limit = 0.0
    for pt, m in zip(mu.points, mu.masses):
        for state, pr in law.items():
            w = np.array(state, dtype=np.int64)
            rhs_limit += float(m) * float(pr) * float(F.G(((pt[None, :] + w) % p ** r)[None])[0])
    return PalmReport(mc_mean(lhs), rhs, rhs_limit, n)
