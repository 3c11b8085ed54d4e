import math
from fractions import Fraction

import numpy as np
import pytest

from ultrabrown import localtime as lt
from ultrabrown.brownian import BrownianConfig

H_221 = 0.45631098730792363


def test_survival_root_for_221():
    sp = lt.solve_survival(2, 2, 1)
    assert abs(sp.h - H_221) < 1e-14
    assert sp.residual < 1e-14
    # y = 1 - h solves y = 1/2 + y^4 / 2, i.e. (y - 1)(y^3 + y^2 + y - 1) = 0
    y = 1 - sp.h
    assert abs(y ** 3 + y ** 2 + y - 1) < 1e-14


def test_offspring_law_is_conditioned_binomial():
    sp = lt.solve_survival(2, 2, 1)
    assert abs(float(sum(sp.Q.values())) - 1) < 1e-15
    assert set(sp.Q) == {1, 2, 3, 4}
    assert abs(float(sp.q_mean()) - 2) < 1e-12
    assert sp.mean_offspring == 2


@pytest.mark.parametrize("p,N,d", [(3, 1, 1), (2, 1, 1), (2, 1, 2), (5, 2, 2)])
def test_critical_and_subcritical_never_hit(p, N, d):
    sp = lt.solve_survival(p, N, d)
    assert sp.h == 0 and sp.Q == {}
    with pytest.raises(ValueError):
        lt.gw_simulate(sp, 2, 5)


@pytest.mark.parametrize("p,N,d", [(2, 2, 1), (3, 2, 1), (2, 3, 2)])
def test_q_mean_is_growth_rate(p, N, d):
    sp = lt.solve_survival(p, N, d)
    assert 0 < sp.h < 1 and sp.residual < 1e-12
    assert abs(float(sp.q_mean()) - float(sp.mean_offspring)) < 1e-9


def test_finite_horizon_decreases_to_h():
    hs = lt.finite_horizon_survival(2, 2, 1, 6)
    assert hs[0] == Fraction(1, 2) and hs[1] == Fraction(15, 32)
    assert all(a >= b > H_221 for a, b in zip(hs, hs[1:]))
    assert float(hs[-1]) - H_221 < 1e-3


def test_gw_mean():
    sp = lt.solve_survival(2, 2, 1)
    V = lt.gw_simulate(sp, 6, 5000, seed=1)
    assert np.all(V[:, 0] == 1) and np.all(np.diff(V, axis=1) >= 0)
    assert lt.gw_mean_check(sp, 6, 20_000, seed=2).within(1.0)
    W = lt.gw_normalised(V, sp)
    assert np.allclose(W[:, 0], 1)


def test_gw_is_seeded():
    sp = lt.solve_survival(2, 2, 1)
    assert np.array_equal(lt.gw_simulate(sp, 4, 100, 3), lt.gw_simulate(sp, 4, 100, 3))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_candidate_means(n):
    cfg = BrownianConfig(2, 2, 1, 6, seed=4)
    st = lt.candidate_stats(cfg, n, 20_000)
    from ultrabrown.stats import mc_mean
    assert lt.expected_candidates(2, 2, 1, n) == Fraction(4 ** n, 2 ** (n + 1))
    assert mc_mean(st.counts[:, n]).within(float(lt.expected_candidates(2, 2, 1, n)))


def test_candidate_sets_nest():
    cfg = BrownianConfig(2, 2, 1, 6, seed=8)
    for n in range(4):
        assert lt.nesting_violations(cfg, n, cfg.paths(300)) == 0
    c2 = lt.candidates(cfg, 2)
    c3 = lt.candidates(cfg, 3)
    assert set((c3.indices // 4).tolist()) <= set(c2.indices.tolist())
    assert all(a.level == 2 for a in c2.addresses())
    with pytest.raises(ValueError):
        lt.candidates(cfg, 6)


def test_dilation_support_shrinks_with_m():
    for path in range(30):
        cfg = BrownianConfig(2, 2, 1, 8, seed=9, path=path)
        supports = [set(lt.dilation_estimate(cfg, 2, m)) for m in range(2, 7)]
        assert all(b <= a for a, b in zip(supports, supports[1:]))
        for est in (lt.dilation_estimate(cfg, 2, 4),):
            assert all(w == 2.0 ** -2 for w in est.values())


def test_dilation_total_matches_support_size():
    cfg = BrownianConfig(2, 2, 1, 8, seed=9)
    totals = lt.dilation_total_mass(cfg, 2, 5, 1)
    assert math.isclose(totals[0], sum(lt.dilation_estimate(cfg, 2, 5).values()))


@pytest.mark.parametrize("level", [0, 1, 2])
def test_offspring_counts_follow_finite_horizon_law(level):
    cfg = BrownianConfig(2, 2, 1, 6, seed=12)
    st = lt.candidate_stats(cfg, 4, 20_000)
    assert lt.offspring_test(st, 2, 2, 1, level).passed


def test_offspring_test_rejects_wrong_law():
    cfg = BrownianConfig(2, 2, 1, 6, seed=12)
    st = lt.candidate_stats(cfg, 4, 20_000)
    wrong = {4: Fraction(1)}
    assert not lt.offspring_test(st, 2, 2, 1, 0, law=wrong).passed


@pytest.mark.parametrize("p,N,d,n,r", [(2, 1, 1, 4, 2), (2, 2, 1, 3, 3), (3, 1, 2, 3, 1)])
def test_occupation_totals(p, N, d, n, r):
    cfg = BrownianConfig(p, N, d, n + 1, seed=1)
    tot = lt.occupation_totals(cfg, n, r, cfg.paths(50))
    assert np.all(np.abs(tot - 1) < 1e-12)
    field = lt.local_time_field(cfg, n, r)
    assert abs(field.total() - 1) < 1e-12 and np.all(field.density >= 0)


def test_occupation_resolution_guard():
    cfg = BrownianConfig(2, 1, 1, 4)
    with pytest.raises(ValueError):
        lt.local_time_field(cfg, 2, 3)
    with pytest.raises(ValueError):
        lt.dilation_estimate(cfg, 3, 2)


def test_f_measure_cover_runs():
    cfg = BrownianConfig(2, 2, 1, 8, seed=2)
    assert lt.f_measure_cover(cfg, 3, 5) >= 0
    with pytest.raises(ValueError):
        lt.f_measure_cover(cfg, 1, 5)
