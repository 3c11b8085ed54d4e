"""Finite-group goodness-of-fit tests, TV distance and Monte Carlo error bars."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as _st

ALPHA = 0.001
SIGMAS = 3.0
MIN_EXPECTED = 5.0


class UndersampledError(ValueError):
    """Some cell has expected count below the chi-square validity threshold."""


@dataclass
class TestReport:
    __test__ = False  # keep pytest from collecting this

    name: str
    statistic: float
    dof: int
    p_value: float
    n_samples: int
    alpha: float = ALPHA
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.p_value >= self.alpha

    def to_json(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out


def chi_square_uniform(counts, name: str = "uniform", alpha: float = ALPHA,
                       seed: int | None = None) -> TestReport:
    counts = np.asarray(counts, dtype=float).ravel()
    n = counts.sum()
    if counts.size < 2 or n <= 0:
        raise ValueError("need at least two cells and a positive total")
    expected = n / counts.size
    if expected < MIN_EXPECTED:
        raise UndersampledError(f"expected count {expected:.3g} < {MIN_EXPECTED}")
    stat = float(((counts - expected) ** 2).sum() / expected)
    dof = counts.size - 1
    return TestReport(name, stat, dof, float(_st.chi2.sf(stat, dof)), int(n), alpha, seed)


def chi_square_expected(counts, probs, name: str = "goodness-of-fit", alpha: float = ALPHA,
                        seed: int | None = None) -> TestReport:
    """Chi-square against an explicit null law; zero-probability cells must be empty."""
    counts = np.asarray(counts, dtype=float).ravel()
    probs = np.asarray(probs, dtype=float).ravel()
    n = counts.sum()
    support = probs > 0
    if np.any(counts[~support] > 0):
        return TestReport(name, math.inf, int(support.sum()) - 1, 0.0, int(n), alpha, seed,
                          {"reason": "mass outside the null support"})
    expected = n * probs[support] / probs[support].sum()
    if expected.min() < MIN_EXPECTED:
        raise UndersampledError(f"expected count {expected.min():.3g} < {MIN_EXPECTED}")
    stat = float(((counts[support] - expected) ** 2 / expected).sum())
    dof = int(support.sum()) - 1
    return TestReport(name, stat, dof, float(_st.chi2.sf(stat, dof)), int(n), alpha, seed)


def chi_square_contingency(table, name: str = "independence", alpha: float = ALPHA,
                           seed: int | None = None) -> TestReport:
    """Independence test on a 2-D count table; empty rows and columns are dropped."""
    table = np.asarray(table, dtype=float)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    n = table.sum()
    if table.shape[0] < 2 or table.shape[1] < 2:
        return TestReport(name, 0.0, 0, 1.0, int(n), alpha, seed, {"degenerate": True})
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    if expected.min() < MIN_EXPECTED:
        raise UndersampledError(f"expected count {expected.min():.3g} < {MIN_EXPECTED}")
    stat = float(((table - expected) ** 2 / expected).sum())
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    return TestReport(name, stat, dof, float(_st.chi2.sf(stat, dof)), int(n), alpha, seed)


def chi_square_homogeneity(counts_a, counts_b, name: str = "homogeneity",
                           alpha: float = ALPHA, seed: int | None = None) -> TestReport:
    """Do two histograms over the same cells come from one law?"""
    table = np.vstack([np.asarray(counts_a, dtype=float).ravel(),
                       np.asarray(counts_b, dtype=float).ravel()])
    rep = chi_square_contingency(table, name, alpha, seed)
    rep.extra["tv"] = tv_distance(counts_a, counts_b)
    return rep


def tv_distance(hist1, hist2) -> float:
    a = np.asarray(hist1, dtype=float).ravel()
    b = np.asarray(hist2, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("histograms must share a support")
    if a.sum() <= 0 or b.sum() <= 0:
        raise ValueError("empty histogram")
    return float(0.5 * np.abs(a / a.sum() - b / b.sum()).sum())


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    n: int

    def within(self, target: float, sigmas: float = SIGMAS) -> bool:
        return within_band(self.mean, self.stderr, target, sigmas)

    def to_json(self) -> dict:
        return asdict(self)


def mc_mean(values) -> MCEstimate:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no samples")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.inf
    return MCEstimate(float(v.mean()), se, int(v.size))


def within_band(estimate: float, stderr: float, target: float,
                sigmas: float = SIGMAS) -> bool:
    """|estimate - target| <= sigmas * stderr; a zero stderr demands equality."""
    return abs(estimate - target) <= sigmas * stderr + 1e-12 * max(1.0, abs(target))
