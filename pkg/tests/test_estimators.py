import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsephase._subsets import BudgetExceededError
from sparsephase.design import replicate_rng
from sparsephase.estimators import (best_subset_ls, full_ls, greedy_forward_supports, kstar_n, pen_bm, pen_v,
                                    select_bm, select_v)


def orthogonal_design(n, p, seed=0):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
    return math.sqrt(n) * q


def brute_force_best_subset(Y, X, k):
    best = (math.inf, None)
    for m in itertools.combinations(range(X.shape[1]), k):
        coef, *_ = np.linalg.lstsq(X[:, m], Y, rcond=None)
        r = float(np.sum((Y - X[:, m] @ coef) ** 2))
        if r < best[0]:
            best = (r, m)
    return best


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("k", [1, 2, 3])
def test_best_subset_is_hard_thresholding_on_orthogonal_design(seed, k):
    n, p = 12, 6
    X = orthogonal_design(n, p, seed)
    Y = np.random.default_rng(seed + 10).standard_normal(n)
    theta, rss = best_subset_ls(Y, X, k)
    z = X.T @ Y / n
    keep = np.sort(np.argsort(-np.abs(z), kind="stable")[:k])
    expected = np.zeros(p)
    expected[keep] = z[keep]
    np.testing.assert_allclose(theta.to_dense(), expected, atol=1e-9)
    assert rss == pytest.approx(float(np.sum((Y - X @ expected) ** 2)), abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_best_subset_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, p = 9, 7
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal(n)
    for k in range(1, p + 1):
        theta, rss = best_subset_ls(Y, X, k)
        ref, _ = brute_force_best_subset(Y, X, k)
        assert rss == pytest.approx(ref, abs=1e-9)
        assert theta.k <= k


def test_best_subset_noiseless_recovery():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((15, 8))
    theta0 = np.zeros(8)
    theta0[[1, 5]] = [2.0, -3.0]
    theta, rss = best_subset_ls(X @ theta0, X, 2)
    assert rss == pytest.approx(0.0, abs=1e-18)
    assert theta.support == (2, 6)


def test_best_subset_full_size_equals_full_ls():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((6, 6))
    Y = rng.standard_normal(6)
    _, rss = best_subset_ls(Y, X, 6)
    assert rss == pytest.approx(full_ls(Y, X)[1], abs=1e-18)


def test_best_subset_budget_and_range():
    with pytest.raises(BudgetExceededError):
        best_subset_ls(np.ones(5), np.ones((5, 50)), 4, budget=100)
    with pytest.raises(ValueError):
        best_subset_ls(np.ones(5), np.ones((5, 3)), 4)


def test_full_ls_special_cases():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((5, 8))
    assert full_ls(rng.standard_normal(5), X)[1] == pytest.approx(0.0, abs=1e-20)
    Y = rng.standard_normal(5)
    theta, rss = full_ls(Y, np.zeros((5, 3)))
    np.testing.assert_array_equal(theta, 0.0)
    assert rss == pytest.approx(float(Y @ Y))
    Q = orthogonal_design(10, 4)
    Y = rng.standard_normal(10)
    np.testing.assert_allclose(full_ls(Y, Q)[0], Q.T @ Y / 10, atol=1e-12)


def test_pen_v_plug_in():
    assert pen_v(1, 40, 100, 3.0) == pytest.approx(3.0 * math.log(math.e * 100) / 40)
    assert pen_v(5, 21, 5, 2.0) == pytest.approx(2.0 * 5 / 21)


@given(n=st.integers(5, 400), p=st.integers(1, 10**5))
@settings(max_examples=60, deadline=None)
def test_pen_v_increasing(n, p):
    top = min((n - 1) // 4, p)
    vals = [pen_v(k, n, p) for k in range(1, top + 1)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_pen_v_range_is_enforced():
    with pytest.raises(ValueError):
        pen_v(3, 12, 100)
    with pytest.raises(ValueError):
        pen_v(0, 12, 100)


def test_kstar_n_values():
    assert kstar_n(50, 5000) == 7
    assert kstar_n(1, 1) == 1
    assert kstar_n(30, 40) == 16


@given(n=st.integers(1, 300), p=st.integers(1, 300))
@settings(max_examples=80, deadline=None)
def test_kstar_n_monotone_in_n(n, p):
    assert kstar_n(n + 1, p) >= kstar_n(n, p)


def test_pen_bm_values():
    assert pen_bm(1, 30, 40) == pytest.approx(4 * (4 + math.log(40)))
    assert pen_bm(30, 30, 40) == 60.0


def test_select_v_pure_noise_prefers_one():
    picks = []
    for r in range(500):
        rng = replicate_rng(21, r)
        X = rng.standard_normal((30, 10))
        picks.append(select_v(rng.standard_normal(30), X).selected_k)
    assert np.mean(np.array(picks) == 1) >= 0.6


def test_select_v_keeps_strong_support():
    X = orthogonal_design(40, 8)
    theta0 = np.zeros(8)
    theta0[[2, 6]] = 10.0
    hits = 0
    for r in range(500):
        rng = replicate_rng(22, r)
        res = select_v(X @ theta0 + rng.standard_normal(40), X)
        hits += {3, 7} <= set(res.theta_hat.support)
    assert hits / 500 >= 0.95


def test_select_v_scale_shifts_criterion():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((25, 8))
    Y = X[:, 0] * 2 + rng.standard_normal(25)
    a, b = select_v(Y, X), select_v(5.0 * Y, X)
    assert a.selected_k == b.selected_k
    for (k1, c1), (k2, c2) in zip(a.criterion_path, b.criterion_path):
        assert c2 - c1 == pytest.approx(2 * math.log(5.0), abs=1e-10)


def test_select_v_paths_are_consistent():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((41, 9))
    res = select_v(rng.standard_normal(41), X)
    rss = [r for _, r in res.rss_path]
    assert all(b <= a + 1e-12 for a, b in zip(rss, rss[1:]))
    assert res.criterion == min(c for _, c in res.criterion_path)
    assert [k for k, _ in res.rss_path] == list(range(1, 10))
    assert res.to_csv().splitlines()[0] == "selector,selected_k,support,rss,criterion"


def test_select_v_needs_room():
    with pytest.raises(ValueError):
        select_v(np.ones(4), np.ones((4, 3)))


def test_select_bm_noise_mostly_sparse():
    # with pen(1) = 4(4 + log 40) and pen(n) = 60 the full fit wins iff
    # RSS_1 > 60 - pen(1); under pure noise this happens about 22% of the time
    n, p = 30, 40
    picks, direct = [], []
    for r in range(500):
        rng = replicate_rng(23, r)
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal(n)
        picks.append(select_bm(Y, X, 1.0, k_max=3).selected_k)
        rss1 = float(Y @ Y) - max(float((X[:, j] @ Y) ** 2 / (X[:, j] @ X[:, j])) for j in range(p))
        direct.append(rss1 + pen_bm(1, n, p) < 2.0 * n)
    sparse = np.array(picks) != n
    np.testing.assert_array_equal(sparse, direct)
    assert sparse.mean() >= 0.7


def test_select_bm_range_and_full_fit():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((30, 40))
    res = select_bm(rng.standard_normal(30), X, 1.0, k_max=2)
    assert [k for k, _ in res.criterion_path] == [1, 2, 30]
    assert dict(res.rss_path)[30] == pytest.approx(0.0, abs=1e-18)
    assert dict(res.criterion_path)[30] == pytest.approx(60.0)
    k1 = dict(res.rss_path)[1] + 4 * (4 + math.log(40))
    assert dict(res.criterion_path)[1] == pytest.approx(k1)


def test_select_bm_noiseless_prefers_smallest_exact_fit():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((20, 6))
    theta0 = np.zeros(6)
    theta0[1] = 3.0
    res = select_bm(X @ theta0, X, 1.0)
    assert res.selected_k == 1
    assert res.theta_hat.support == (2,)
    assert res.criterion == pytest.approx(pen_bm(1, 20, 6))


def test_select_bm_scale_invariance():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((20, 7))
    Y = 1.5 * X[:, 3] + rng.standard_normal(20)
    a, b = select_bm(Y, X, 1.0), select_bm(4.0 * Y, X, 16.0)
    assert a.selected_k == b.selected_k
    for (_, c1), (_, c2) in zip(a.criterion_path, b.criterion_path):
        assert c2 == pytest.approx(16.0 * c1, rel=1e-10)


def test_select_bm_rejects_bad_variance():
    with pytest.raises(ValueError):
        select_bm(np.ones(5), np.ones((5, 2)), 0.0)


def test_greedy_forward_is_nested():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((15, 10))
    Y = X[:, 4] * 3 + X[:, 7] + 0.1 * rng.standard_normal(15)
    sup = greedy_forward_supports(Y, X, 3)
    assert sup[0] == (5,)
    assert all(set(a) <= set(b) for a, b in zip(sup, sup[1:]))
