import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultrabrown import potential as pot
from ultrabrown.brownian import BrownianConfig
from ultrabrown.padic import BallAddress

KP = pot.KernelParams(2, 2, 1)
DELTA = pot.AtomicMeasure.point_mass(2, 1, 8)


def test_kernel_values():
    assert pot.riesz_kernel(KP, 0) == Fraction(3, 4)
    assert pot.riesz_kernel(KP, Fraction(1, 2)) == Fraction(3, 8)
    assert pot.riesz_kernel(KP, 1) == 0
    assert pot.riesz_kernel(pot.KernelParams(2, 1, 1), 0) == pot.INF
    with pytest.raises(ValueError):
        pot.riesz_kernel(KP, Fraction(1, 3))


@pytest.mark.parametrize("p,N,d", [(2, 2, 1), (3, 1, 1), (2, 1, 2), (3, 3, 2)])
def test_kernel_matches_level_sum_and_is_nonincreasing(p, N, d):
    kp = pot.KernelParams(p, N, d)
    vals = [pot.riesz_kernel(kp, Fraction(1, p ** k)) for k in range(8)]
    assert vals == [pot.riesz_kernel_series(kp, k) for k in range(8)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    if kp.finite_at_zero:
        assert all(v <= pot.riesz_kernel(kp, 0) for v in vals)


def test_smoothed_energies_of_point_mass():
    expected = [Fraction(1, 4), Fraction(1, 2), Fraction(5, 8), Fraction(11, 16),
                Fraction(23, 32), Fraction(47, 64)]
    got = [pot.smoothed_energy(KP, DELTA, n) for n in range(6)]
    assert got == expected
    assert pot.energy(KP, DELTA) == Fraction(3, 4)
    assert abs(pot.smoothed_energy(KP, DELTA, 8) - Fraction(3, 4)) < Fraction(1, 200)


@pytest.mark.parametrize("p,N,d", [(2, 1, 1), (3, 1, 1), (2, 2, 1), (2, 1, 2)])
def test_smoothed_kernel_is_ball_average(p, N, d):
    """Average u over z in p^n D^d by listing residues mod p^(n + 6)."""
    kp = pot.KernelParams(p, N, d)
    n, extra = 2, 6
    mod = p ** (n + extra)
    import itertools
    total = Fraction(0)
    count = 0
    for z in itertools.product(range(0, mod, p ** n), repeat=d):
        v = min(pot.vp(c, p) if c else 10 ** 6 for c in z)
        if v >= n + extra:
            continue  # the tail near zero is handled analytically below
        total += pot.riesz_kernel(kp, Fraction(1, p ** v))
        count += 1
    if kp.finite_at_zero:
        cells = (mod // p ** n) ** d
        approx = (total + (cells - count) * pot.riesz_kernel(kp, 0)) / cells
        err = abs(approx - pot.smoothed_kernel_at_zero(kp, n))
        assert err <= pot.riesz_kernel(kp, 0) * Fraction(1, p ** (d * extra))
    else:
        assert pot.smoothed_kernel_at_zero(kp, n) < pot.smoothed_kernel_at_zero(kp, n + 1)


@given(st.lists(st.integers(0, 255), min_size=1, max_size=5, unique=True), st.data())
def test_energy_homogeneity_and_symmetry(points, data):
    masses = [Fraction(data.draw(st.integers(0, 9)), 3) for _ in points]
    mu = pot.AtomicMeasure(2, 8, np.array(points).reshape(-1, 1), tuple(masses))
    c = Fraction(data.draw(st.integers(1, 7)), 2)
    assert pot.energy(KP, mu.scaled(c)) == c * c * pot.energy(KP, mu)
    K = pot.kernel_matrix(KP, mu.points, 8)
    assert all(K[i][j] == K[j][i] for i in range(len(K)) for j in range(len(K)))
    assert pot.energy(KP, mu) >= 0


def test_equilibrium_two_points():
    res = pot.equilibrium(KP, [[0], [1]], 8)
    assert res.converged
    assert np.allclose(res.masses, [0.5, 0.5], atol=1e-9)
    assert abs(res.energy - 0.375) < 1e-9
    assert abs(res.capacity - 8 / 3) < 1e-8
    m, e = pot.brute_force_equilibrium(KP, [[0], [1]], 8)
    assert np.allclose(m, [0.5, 0.5]) and abs(e - res.energy) < 1e-6


def test_equilibrium_three_points_matches_grid_search():
    pts = [[0], [2], [1]]
    res = pot.equilibrium(KP, pts, 8)
    m, e = pot.brute_force_equilibrium(KP, pts, 8)
    assert abs(res.energy - e) < 1e-5
    assert res.energy <= e + 1e-12


def test_single_point_capacity_and_polarity():
    assert abs(pot.capacity(KP, [[0]], 8) - 4 / 3) < 1e-12
    weak = pot.KernelParams(2, 1, 1)
    assert pot.capacity(weak, [[0], [1]], 8) == 0.0
    assert pot.is_polar(weak, [[0]], 8) and not pot.is_polar(KP, [[0]], 8)
    assert pot.energy(weak, DELTA) == pot.INF


def test_potential_sup_check():
    mu = pot.AtomicMeasure.uniform(2, 8, [[0], [1]])
    probes = np.arange(256).reshape(-1, 1)
    chk = pot.potential_sup_check(KP, mu, probes)
    assert chk.passed and chk.sup_support == Fraction(3, 8)


def test_zero_measure():
    zero = pot.AtomicMeasure.zero(2, 1, 8)
    cfg = BrownianConfig(2, 2, 1, 3, seed=1)
    assert pot.energy(KP, zero) == 0
    assert pot.potential(KP, zero, [5]) == 0
    assert np.all(pot.approximant_mass(cfg, zero, 2, cfg.paths(10)) == 0)
    F = pot.CylinderFunctional(np.array([[1, 0]]), 1, pot.norm_at_most(0, 2, 1))
    assert pot.palm_check(cfg, zero, F, 2, 10).rhs == 0


def test_measure_json_round_trip():
    mu = pot.AtomicMeasure(3, 4, np.array([[1, 2], [0, 5]]), (Fraction(1, 3), Fraction(2, 7)))
    back = pot.AtomicMeasure.from_json(json.dumps(mu.to_json()))
    assert back.masses == mu.masses and np.array_equal(back.points, mu.points)
    z = pot.AtomicMeasure.from_json(pot.AtomicMeasure.zero(3, 2, 4).to_json())
    assert z.d == 2 and not z.masses


def test_measure_validation():
    with pytest.raises(ValueError):
        pot.AtomicMeasure(2, 4, np.array([[1]]), (Fraction(-1),))
    with pytest.raises(ValueError):
        pot.AtomicMeasure(2, 2, np.array([[1], [5]]), (1, 1))


def test_uniform_on_ball():
    mu = pot.AtomicMeasure.uniform_on_ball(2, 1, [1], 1, 3)
    assert len(mu.masses) == 4 and mu.total_mass == 1
    assert np.all(mu.points % 2 == 1)


def test_approximant_additive_and_nonnegative():
    cfg = BrownianConfig(2, 2, 1, 4, seed=3)
    mu = pot.AtomicMeasure.uniform(2, 8, [[0], [3]])
    paths = cfg.paths(500)
    n = 2
    quarters = [BallAddress.from_index(i, 2, 2, 1) for i in range(4)]
    parts = [pot.approximant_mass(cfg, mu, n, paths, [b]) for b in quarters]
    whole = pot.approximant_mass(cfg, mu, n, paths)
    assert np.allclose(sum(parts), whole)
    assert np.all(whole >= 0)
    assert np.allclose(pot.approximant_mass(cfg, mu, n, paths, quarters[:2]), parts[0] + parts[1])


def test_first_moment_is_total_mass():
    cfg = BrownianConfig(2, 2, 1, 4, seed=5)
    rep = pot.second_moment_check(cfg, DELTA, 3, 20_000)
    assert rep.first_moment.within(1.0)
    assert rep.target == Fraction(11, 16)
    assert rep.pair_density_target == Fraction(11, 4)


def test_martingale_property():
    cfg = BrownianConfig(2, 2, 1, 4, seed=7)
    rep = pot.martingale_check(cfg, DELTA, 2, 400, 50)
    assert rep.passed
    assert abs(rep.slope - 1) < 0.15


def test_quotient_law_of_W_is_a_probability():
    law = pot.quotient_law_of_W(2, 2, 1, [[1, 0], [0, 1]], 2)
    assert sum(law.values()) == 1
    # W vanishes at 0, so a point in the ball of 0 up to level r carries nothing
    assert pot.quotient_law_of_W(2, 1, 1, [[0]], 3) == {((0,),): Fraction(1)}


@pytest.mark.parametrize("which", ["constant", "norm"])
def test_palm_identity(which):
    cfg = BrownianConfig(2, 2, 1, 2, seed=11)
    t0 = np.array([[1, 0]])
    G = (lambda v: np.ones(v.shape[:-2])) if which == "constant" else pot.norm_at_most(0, 2, 1)
    rep = pot.palm_check(cfg, DELTA, pot.CylinderFunctional(t0, 1, G), 2, 20_000)
    assert rep.passed
    if which == "constant":
        assert abs(rep.rhs - 1) < 1e-12
