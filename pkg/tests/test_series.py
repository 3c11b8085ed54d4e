import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultrabrown import series as sr
from ultrabrown.gaussian import uniformity_test
from ultrabrown.padic import PadicScalar, PrecisionError


def test_mahler_examples():
    t = PadicScalar.from_int(3, 2, 8)
    assert sr.mahler_binom(t, 0).to_int() == 1
    assert sr.mahler_binom(t, 2).to_int() == 3
    assert sr.mahler_binom(7, 3, p=3, prec=5).to_int() == 35


def test_mahler_loses_factorial_valuation():
    t = PadicScalar.from_int(5, 2, 4)
    assert sr.mahler_binom(t, 2).abs_prec == 3
    with pytest.raises(PrecisionError):
        sr.mahler_binom(t, 8)  # v_2(8!) = 7 >= 4
    with pytest.raises(ValueError):
        sr.mahler_binom(3, 1)


def test_mahler_values_are_integral():
    rng = random.Random(3)
    for _ in range(10_000):
        p = rng.choice([2, 3, 5])
        t = PadicScalar.from_int(rng.randrange(p ** 30), p, 30)
        n = rng.randrange(0, 20)
        assert sr.mahler_binom(t, n).norm() <= 1


def test_vdp_examples():
    assert sr.vdp_basis(PadicScalar.from_int(9, 2, 6), 0) == 1
    for x in range(32):
        assert sr.vdp_basis(x, 3, 2) == int(x % 4 == 3)
    assert sr.n_minus(3, 2) == 1
    assert sr.n_minus(1, 2) == 0
    assert sr.n_minus(14, 3) == 5
    with pytest.raises(ValueError):
        sr.n_minus(0, 2)
    with pytest.raises(PrecisionError):
        sr.vdp_basis(PadicScalar.from_int(1, 2, 1), 3)


@given(st.sampled_from([2, 3]), st.lists(st.integers(-50, 50), min_size=1, max_size=30))
def test_vdp_coefficients_recover_values(p, values):
    coeffs = sr.vdp_coefficients(values, p)
    for t in range(len(values)):
        assert sum(c * sr.vdp_basis(t, n, p) for n, c in enumerate(coeffs)) == values[t]


@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=12), st.integers(0, 200))
def test_mahler_shift_recurrence(coeffs, t):
    b = sr.mahler_shift_coefficients(coeffs)
    lhs = sum(c * math.comb(t + 1, n) for n, c in enumerate(coeffs))
    rhs = sum(c * math.comb(t, n) for n, c in enumerate(b))
    assert lhs == rhs


@given(st.sampled_from([2, 3]), st.sampled_from([sr.MAHLER, sr.VDP]),
       st.lists(st.integers(-3**8, 3**8), min_size=1, max_size=15))
def test_bases_are_orthonormal(p, basis, coeffs):
    """sup over 0..M of |sum c_n f_n| equals max |c_n|."""
    spec = sr.SeriesSpec(p, basis, (0,) * len(coeffs), len(coeffs) - 1, 6)
    from ultrabrown.padic import norm_fraction
    expected = max((norm_fraction(Fraction(c), p) for c in coeffs), default=0)
    assert sr.sup_norm_on_points(spec, coeffs, range(len(coeffs))) == expected


def test_all_zero_series():
    spec = sr.SeriesSpec(2, sr.MAHLER, (math.inf,) * 4, 3, 8)
    assert np.all(sr.series_sample(spec, [0, 1, 5], np.arange(20)) == 0)
    assert sr.series_eval(spec, 3).value.is_zero


def test_constant_series_is_uniform_and_constant():
    spec = sr.SeriesSpec(2, sr.VDP, (0,), 0, 8, seed=5)
    vals = sr.series_sample(spec, [0, 1, 7, 100], np.arange(20_000))
    assert np.all(vals == vals[:, :1])
    assert uniformity_test(vals[:, 0], 2, 4).passed


@pytest.mark.parametrize("basis", [sr.MAHLER, sr.VDP])
def test_values_bounded_by_largest_coefficient(basis):
    spec = sr.SeriesSpec(3, basis, (2, 3, 2, 4, 5), 4, 8, seed=1)
    vals = sr.series_sample(spec, list(range(30)), np.arange(500))
    assert np.all(vals % 9 == 0)


def test_truncation_radius_and_from_norms():
    spec = sr.SeriesSpec.from_norms(2, sr.MAHLER, [1, Fraction(1, 2), 0, Fraction(1, 8)], M=1)
    assert spec.valuations == (0, 1, math.inf, 3)
    assert spec.truncation_radius == Fraction(1, 8)
    assert sr.series_eval(spec, 4, path=2).radius == Fraction(1, 8)
    with pytest.raises(ValueError):
        sr.SeriesSpec.from_norms(2, sr.MAHLER, [Fraction(1, 3)])
    with pytest.raises(ValueError):
        sr.SeriesSpec(2, "fourier", (0,), 0, 4)


def test_series_eval_matches_sample():
    spec = sr.SeriesSpec(2, sr.MAHLER, (0, 1, 1, 2), 3, 10, seed=4)
    batch = sr.series_sample(spec, [6], np.arange(5))
    assert [sr.series_eval(spec, 6, k).value.to_int() for k in range(5)] == batch[:, 0].tolist()


def test_predicates():
    assert sr.stationary_mahler(sr.SeriesSpec(2, sr.MAHLER, (0, 0, 1, 1, 2), 4, 6))
    assert not sr.stationary_mahler(sr.SeriesSpec(2, sr.MAHLER, (1, 0), 1, 6))
    assert sr.vdp_predicate((0, 1, 2, 2, 3, 3, 3, 3), 2)
    assert not sr.vdp_predicate((0, 1, 2, 3), 2)       # block {2, 3} not constant
    assert not sr.vdp_predicate((1, 0, 0, 0), 2)       # norm grows from e_0 to e_1
    with pytest.raises(ValueError):
        sr.stationary_vdp(sr.SeriesSpec(2, sr.MAHLER, (0,), 0, 4))


def test_vdp_predicate_against_bruteforce():
    rng = random.Random(8)
    for _ in range(1000):
        p = rng.choice([2, 3])
        M = rng.randrange(0, 20)
        vals = [rng.choice([0, 1, 2, math.inf]) for _ in range(M + 1)]
        assert sr.vdp_predicate(vals, p) == sr.vdp_predicate_bruteforce(vals, p)


def test_exact_law_is_uniform_on_subgroup():
    spec = sr.SeriesSpec(2, sr.MAHLER, (0, 1), 1, 6)
    law = sr.quotient_law_exact(spec, [0, 1], 2)
    assert sum(law.values()) == 1 and len(law) == 8


def test_increasing_mahler_norms_break_stationarity():
    spec = sr.SeriesSpec(2, sr.MAHLER, (1, 0), 1, 8, seed=2)
    rep = sr.stationarity_test(spec, 1, [0], 1, 20_000)
    assert not rep.passed and rep.extra["tv_exact"] == 0.5


@pytest.mark.parametrize("spec,shift,points", [
    (sr.SeriesSpec(2, sr.MAHLER, (0, 0, 1, 1, 2, 3), 5, 10), 5, [0, 1, 3]),
    (sr.SeriesSpec(2, sr.VDP, (0, 1, 2, 2, 3, 3, 3, 3), 7, 10), 3, [0, 1, 2]),
])
def test_nonincreasing_series_are_stationary(spec, shift, points):
    rep = sr.stationarity_test(spec, shift, points, 2, 20_000)
    assert rep.passed and rep.extra["tv_exact"] == 0


def test_vdp_predicate_matches_exact_law_on_small_cases():
    """Where the predicate holds, the exact quotient law is shift invariant."""
    rng = random.Random(4)
    for _ in range(40):
        v = [rng.choice([0, 1, 2]) for _ in range(4)]
        if not sr.vdp_predicate(v, 2):
            continue
        spec = sr.SeriesSpec(2, sr.VDP, tuple(v), 3, 4)
        for s in (1, 2, 3):
            assert sr.quotient_law_exact(spec, [0, 1, 2, 3], 2) == \
                sr.quotient_law_exact(spec, [s, s + 1, s + 2, s + 3], 2)
