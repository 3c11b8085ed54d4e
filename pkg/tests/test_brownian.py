import csv
import itertools
from fractions import Fraction

import numpy as np
import pytest

from ultrabrown import brownian as bm
from ultrabrown.padic import BallAddress, PadicVector


def enumerate_hitting(p, N, d, m):
    """Exact P{X = 0 mod p^(m+1) on every level-m ball} by listing all weight choices."""
    mod = p ** (m + 1)
    slots = []  # (level, ball index) for every weight coordinate
    for k in range(m + 1):
        slots += [(k, i) for i in range(p ** (N * k)) for _ in range(d)]
    choices = [range(0, mod, p ** k) for k, _ in slots]
    hits = total = 0
    for combo in itertools.product(*choices):
        total += 1
        weights = {}
        for (k, i), z in zip(slots, combo):
            weights.setdefault((k, i), []).append(z)
        ok = True
        for leaf in range(p ** (N * m)):
            acc = [0] * d
            for k in range(m + 1):
                w = weights[(k, leaf // p ** (N * (m - k)))]
                acc = [a + b for a, b in zip(acc, w)]
            if any(a % mod for a in acc):
                ok = False
                break
        hits += ok
    return Fraction(hits, total)


@pytest.mark.parametrize("m,expected", [(0, Fraction(1, 2)), (1, Fraction(1, 8)),
                                        (2, Fraction(1, 128))])
def test_hitting_exact_values(m, expected):
    assert bm.hitting_prob_exact(2, 1, 1, m) == expected


@pytest.mark.parametrize("p,N,d,m", [(2, 1, 1, 2), (3, 1, 1, 1), (2, 2, 1, 1), (2, 1, 2, 1)])
def test_hitting_exact_matches_enumeration(p, N, d, m):
    assert bm.hitting_prob_exact(p, N, d, m) == enumerate_hitting(p, N, d, m)


def test_hitting_mc_agrees_with_exact():
    cfg = bm.BrownianConfig(2, 1, 1, 3, seed=7)
    est = bm.hitting_prob_mc(cfg, 1, 40_000)
    assert est.within(1 / 8)


def test_hitting_nonzero_admissible_target():
    cfg = bm.BrownianConfig(2, 1, 1, 3, seed=1)
    f = np.array([[1], [3]])  # equal mod 2, so admissible at level 1
    assert bm.hitting_prob_mc(cfg, 1, 40_000, f=f).within(1 / 8)


def test_outside_support():
    with pytest.raises(bm.OutsideSupportError) as err:
        bm.hitting_prob_exact(2, 1, 1, 1, f=np.array([[0], [1]]))
    assert err.value.probability == 0


def test_depth_zero_is_uniform():
    cfg = bm.BrownianConfig(2, 1, 1, 0, seed=3)
    vals = bm.grid_batch(cfg, 0, cfg.paths(4000))[:, 0, 0]
    assert set(np.unique(vals)) == {0, 1}
    assert abs(vals.mean() - 0.5) < 0.04


@pytest.mark.parametrize("carry", [True, False])
@pytest.mark.parametrize("p,N,d", [(2, 1, 1), (2, 2, 1), (3, 1, 2)])
def test_module_constraint_has_no_violations(p, N, d, carry):
    cfg = bm.BrownianConfig(p, N, d, 4, seed=2, carry=carry)
    m = 2 if p ** N <= 4 else 1
    pts = bm.grid_representatives(p, N, m)
    vals = bm.evaluate_many(cfg, pts, cfg.paths(200))
    chk = bm.module_check(vals, pts, p, cfg.prec, carry)
    assert chk.violations == 0 and chk.norm_violations == 0
    assert np.all(chk.equality_counts > 0)


def test_module_check_flags_bad_values():
    pts = bm.grid_representatives(2, 1, 1)
    vals = np.array([[[0], [1]]])
    assert bm.module_check(vals, pts, 2, 3, True).violations == 1


def test_evaluate_paths_agree():
    cfg = bm.BrownianConfig(3, 2, 2, 3, seed=11, path=5)
    g = bm.grid(cfg, 3)
    pts = bm.grid_representatives(3, 2, 3)
    many = bm.evaluate_many(cfg, pts)[0]
    assert np.array_equal(many, g.values)
    for i in (0, 7, 80):
        t = PadicVector.from_ints(list(pts[i]), 3, 3)
        assert bm.evaluate(cfg, t).residues(cfg.prec) == tuple(g.values[i])
        ball = BallAddress.from_index(i, 3, 2, 3)
        assert np.array_equal(g.at(ball), g.values[i])


def test_evaluate_is_deterministic_and_keyed():
    cfg = bm.BrownianConfig(2, 1, 1, 6, seed=1)
    t = PadicVector.from_ints([5], 2, 6)
    assert bm.evaluate(cfg, t) == bm.evaluate(cfg, t)
    other = [bm.evaluate(bm.with_path(cfg, k), t) for k in range(1, 20)]
    assert any(o != bm.evaluate(cfg, t) for o in other)


def test_weight_lies_in_scaled_ball():
    cfg = bm.BrownianConfig(2, 1, 2, 5, seed=4)
    for lvl in range(4):
        w = bm.weight(cfg, BallAddress.from_index(1 if lvl else 0, 2, 1, lvl))
        assert w.norm() <= Fraction(1, 2 ** lvl)


def test_ordered_increments_independent():
    cfg = bm.BrownianConfig(2, 1, 1, 5, seed=13)
    points = [[0], [2], [1], [3]]
    for rep in bm.increments_test(cfg, points, 30_000, 2):
        assert rep.passed
    with pytest.raises(ValueError):
        bm.increments_test(cfg, [[1], [0]], 10, 1)


@pytest.mark.parametrize("t", [[1], [2]])
def test_pair_law(t):
    cfg = bm.BrownianConfig(2, 1, 1, 5, seed=17)
    assert bm.pair_law_test(cfg, t, 50_000).passed


def test_shift_invariance():
    cfg = bm.BrownianConfig(2, 1, 1, 4, seed=19)
    assert bm.shift_test(cfg, [3], [[0], [1], [2]], 40_000, 2).passed


def test_shift_composes():
    cfg = bm.BrownianConfig(2, 1, 1, 4, seed=1)
    a = PadicVector.from_ints([3], 2, 4)
    b = PadicVector.from_ints([6], 2, 4)
    t = PadicVector.from_ints([1], 2, 4)
    assert bm.shift(cfg, a).then(b).evaluate(t) == bm.evaluate(cfg, PadicVector.from_ints([10], 2, 4))


def test_anchor_independence():
    cfg = bm.BrownianConfig(3, 1, 1, 4, seed=23)
    assert bm.anchor_independence_test(cfg, [4], 40_000, 2).passed


def test_ball_factorization():
    cfg = bm.BrownianConfig(2, 1, 1, 5, seed=29)
    assert bm.ball_factorization_test(cfg, [0], [2], [1], 1, 40_000, 2).passed
    with pytest.raises(ValueError):
        bm.ball_factorization_test(cfg, [0], [1], [3], 1, 10, 1)


def test_sub_mod_carry_free():
    assert bm.sub_mod([1], [2], 2, 2, False)[0] == 3
    assert bm.sub_mod([1], [2], 2, 2, True)[0] == 3
    assert bm.sub_mod([2], [1], 2, 2, False)[0] == 3
    assert bm.sub_mod([2], [1], 2, 2, True)[0] == 1


def test_config_validation():
    with pytest.raises(ValueError):
        bm.BrownianConfig(2, 0, 1, 3)
    with pytest.raises(ValueError):
        bm.BrownianConfig(2, 1, 1, 70)
    with pytest.raises(ValueError):
        bm.grid(bm.BrownianConfig(2, 1, 1, 2), 3)


def test_grid_csv(tmp_path):
    cfg = bm.BrownianConfig(2, 1, 1, 2, seed=3)
    path = tmp_path / "g.csv"
    bm.grid(cfg, 2).write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["index", "address", "A0"] and len(rows) == 5
    assert rows[2][1] == "L2[01]"
