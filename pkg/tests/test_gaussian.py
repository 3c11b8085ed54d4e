import csv
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultrabrown import gaussian as g
from ultrabrown.padic import PadicScalar, PadicVector

UNIT = g.GaussianSpec(2, 0, 1, 8)


@pytest.fixture(scope="module")
def unit_samples():
    return g.sample_batch(UNIT, seed=101, count=100_000)[:, 0]


def test_zero_spec_gives_exact_zero():
    spec = g.GaussianSpec(2, 0, 3, 8, zero=True)
    assert g.sample(spec, g.RngKey(1)) == PadicVector.zero(2, 3, 8)
    assert spec.sup_norm == 0 and g.char_exact(g.GaussianSpec(2, 0, 1, 8, zero=True), 99) == 1


def test_precision_must_exceed_level():
    with pytest.raises(ValueError):
        g.GaussianSpec(2, 4, 1, 4)


def test_sample_is_pure_and_matches_batch():
    spec = g.GaussianSpec(3, 1, 2, 6)
    batch = g.sample_batch(spec, seed=4, count=5, start=10)
    for i in range(5):
        key = g.RngKey(4, counter=10 + i)
        assert g.sample(spec, key) == g.sample(spec, key)
        assert g.sample(spec, key).residues(6) == tuple(batch[i])


def test_support_and_leading_digits():
    spec = g.GaussianSpec(3, 2, 2, 7)
    x = g.sample_batch(spec, seed=2, count=2000)
    assert np.all(x % 9 == 0) and np.all(x < 3 ** 7)
    for row in x[:50]:
        v = PadicVector.from_ints(list(row), 3, 7)
        assert v.norm() <= spec.sup_norm


def test_uniform_on_all_256_cells(unit_samples):
    rep = g.uniformity_test(unit_samples, 2, 8, seed=101)
    assert rep.dof == 255 and rep.passed


@pytest.mark.parametrize("r", [1, 2, 4, 6])
def test_every_quotient_is_uniform(unit_samples, r):
    assert g.uniformity_test(unit_samples, 2, r).passed


def test_prob_full_norm():
    spec = g.GaussianSpec(2, 1, 2, 6)
    x = g.sample_batch(spec, seed=8, count=40_000)
    full = np.any(x % 4 != 0, axis=1).mean()
    p = float(spec.prob_full_norm())
    assert p == 0.75
    assert abs(full - p) <= 3 * np.sqrt(p * (1 - p) / x.shape[0])


def test_char_exact_examples():
    assert g.char_exact(UNIT, 1) == 1
    assert g.char_exact(UNIT, Fraction(1, 2)) == 0
    assert g.char_exact(g.GaussianSpec(2, 1, 1, 8), Fraction(1, 2)) == 1
    assert g.char_exact(UNIT, PadicScalar.from_fraction(Fraction(1, 2), 2, 4)) == 0


def test_char_empirical(unit_samples):
    assert g.char_empirical(unit_samples, 0, 2, 8) == 1
    assert g.char_empirical(unit_samples, 1, 2, 8) == 1
    assert abs(g.char_empirical(unit_samples, Fraction(1, 2), 2, 8)) <= 0.02
    assert abs(g.char_empirical(unit_samples, Fraction(3, 4), 2, 8)) <= 0.02
    with pytest.raises(ValueError):
        g.char_empirical(np.array([]), 1, 2, 8)


@given(st.integers(0, 255), st.integers(1, 7))
def test_frac_part_oracle(x, k):
    xi = Fraction(1, 2 ** k)
    expected = Fraction(x % 2 ** k, 2 ** k)
    assert g.frac_part(xi, np.array([x]), 2, 8)[0] == float(expected)


def test_transform_identity_and_mismatch():
    x = g.sample_batch(g.GaussianSpec(2, 0, 3, 8), seed=1, count=20)
    assert np.array_equal(g.transform(x, np.eye(3, dtype=int), 2, 8), x)
    with pytest.raises(ValueError):
        g.transform(x, np.eye(2, dtype=int), 2, 8)


def test_difference_basis_outputs_independent():
    spec = g.GaussianSpec(2, 0, 3, 8)
    x = g.sample_batch(spec, seed=21, count=60_000)
    A = np.array([[1, -1, 0], [0, 1, -1], [0, 0, 1]])
    y = g.transform(x, A, 2, 8)
    for i, j in [(0, 1), (1, 2), (0, 2)]:
        assert g.independence_test(y[:, i], y[:, j], 2, 2).passed
    for i in range(3):
        assert g.uniformity_test(y[:, i], 2, 3).passed


def test_difference_of_iid_units():
    spec = g.GaussianSpec(2, 0, 2, 8)
    x = g.sample_batch(spec, seed=33, count=60_000)
    diff = (x[:, 1] - x[:, 0]) % 256
    assert g.uniformity_test(diff, 2, 4).passed
    assert g.independence_test(x[:, 0], diff, 2, 2).passed


def test_independence_examples():
    spec = g.GaussianSpec(2, 0, 2, 8)
    x = g.sample_batch(spec, seed=5, count=100_000)
    u, v = x[:, 0], x[:, 1]
    assert g.independence_test(u, v, 2, 2).passed
    assert g.independence_test(u, u, 2, 2).p_value < 1e-6
    z = g.sample_batch(g.GaussianSpec(2, 1, 1, 8), seed=6, count=100_000)[:, 0]
    close = (u + z) % 256
    assert not g.independence_test(u, close, 2, 1).passed


def test_scaling_law():
    lvl0 = g.sample_batch(g.GaussianSpec(3, 0, 1, 6), seed=1, count=30_000)[:, 0]
    lvl1 = g.sample_batch(g.GaussianSpec(3, 1, 1, 7), seed=2, count=30_000)[:, 0]
    a = np.bincount((3 * lvl0) % 27, minlength=27)
    b = np.bincount(lvl1 % 27, minlength=27)
    from ultrabrown.stats import chi_square_homogeneity
    assert chi_square_homogeneity(a, b).passed


def test_shift_invariance():
    x = g.sample_batch(g.GaussianSpec(2, 2, 1, 10), seed=9, count=50_000)[:, 0]
    shifted = (x + 4 * 37) % 2 ** 10
    assert g.uniformity_test(shifted // 4, 2, 4).passed


def test_csv_dump(tmp_path):
    x = g.sample_batch(g.GaussianSpec(2, 0, 2, 4), seed=1, count=3)
    path = tmp_path / "s.csv"
    g.write_samples_csv(path, x, 2, 4)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["sample", "x0", "x1"]
    assert PadicScalar.from_compact(rows[1][1]).to_int() == x[0, 0]
