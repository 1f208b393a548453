import math

import numpy as np
import pytest
from sklearn.linear_model import lasso_path

from sparsephase.design import make_theta_experiment, replicate_rng
from sparsephase.screening import PowerCurve, lars_path, lasso_screen, power_metric, sis_screen


def orthogonal_design(n, p, seed=0):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
    return math.sqrt(n) * q


def coordinate_descent_entry_order(Y, X, n_alphas=3000):
    """First-entry order along a fine grid of penalties, solved by coordinate descent."""
    n = X.shape[0]
    top = np.max(np.abs(X.T @ Y)) / n
    alphas = np.geomspace(top, top * 1e-3, n_alphas)
    _, coefs, _ = lasso_path(X, Y, alphas=alphas, tol=1e-12, max_iter=100000)
    order = []
    for i in range(coefs.shape[1]):
        for j in np.flatnonzero(np.abs(coefs[:, i]) > 1e-10):
            if j + 1 not in order:
                order.append(int(j) + 1)
    return order


def test_power_metric_definition():
    assert power_metric({1, 2, 3, 4, 5}, {2, 4}) == 1.0
    assert power_metric({7, 8}, {1, 2}) == 0.0
    assert power_metric({1, 2, 3, 10}, {1, 2, 3, 4}) == 0.75
    with pytest.raises(ValueError):
        power_metric({1}, set())


def test_sis_perfect_correlation_first():
    X = orthogonal_design(10, 6)
    res = sis_screen(X[:, 0], X, 3)
    assert res.selected[0] == 1
    assert len(res.selected) == 3


def test_sis_full_selection():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((8, 5))
    res = sis_screen(rng.standard_normal(8), X, 5)
    assert sorted(res.selected) == [1, 2, 3, 4, 5]


def test_sis_zero_column_ranked_last():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((8, 4))
    X[:, 0] = 0.0
    res = sis_screen(rng.standard_normal(8), X, 4)
    assert res.selected[-1] == 1


@pytest.mark.parametrize("p0", [0, 6])
def test_sis_rejects_bad_p0(p0):
    with pytest.raises(ValueError):
        sis_screen(np.ones(4), np.ones((4, 5)), p0)


def test_sis_one_sparse_recovery():
    n, p = 50, 500
    theta = make_theta_experiment(1, p, 4, n)
    hits = 0
    for r in range(200):
        rng = replicate_rng(31, r)
        X = rng.standard_normal((n, p))
        Y = X[:, :1] @ theta.values + rng.standard_normal(n)
        hits += 1 in sis_screen(Y, X, 50).selected
    assert hits / 200 >= 0.95


def test_lars_orthogonal_matches_correlation_order():
    X = orthogonal_design(12, 8)
    Y = np.random.default_rng(2).standard_normal(12)
    path = lars_path(Y, X)
    expected = [int(j) + 1 for j in np.argsort(-np.abs(X.T @ Y))]
    assert path.entries == expected
    assert path.drops == 0


def test_lars_zero_response():
    path = lars_path(np.zeros(5), np.random.default_rng(0).standard_normal((5, 7)))
    assert path.entries == []


@pytest.mark.parametrize("seed", range(5))
def test_lars_matches_coordinate_descent(seed):
    rng = np.random.default_rng(100 + seed)
    X = rng.standard_normal((20, 30))
    Y = X[:, :3] @ np.array([2.0, -1.5, 1.0]) + rng.standard_normal(20)
    ours = lars_path(Y, X).entries
    ref = coordinate_descent_entry_order(Y, X)
    assert ours[:10] == ref[:10]


def test_lars_entry_correlations_decrease():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((20, 40))
    path = lars_path(rng.standard_normal(20), X)
    corr = path.entry_corr
    assert all(b <= a * (1 + 1e-9) for a, b in zip(corr, corr[1:]))
    assert len(set(path.entries)) == len(path.entries)


def test_lars_until_stops_early():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((30, 60))
    Y = 4 * X[:, 0] + 4 * X[:, 1] + rng.standard_normal(30)
    full = lars_path(Y, X)
    short = lars_path(Y, X, until=[1, 2])
    assert {1, 2} <= set(short.entries)
    assert short.entries == full.entries[:len(short.entries)]


def test_lasso_screen_orthogonal_equals_sis():
    X = orthogonal_design(15, 10)
    Y = np.random.default_rng(3).standard_normal(15)
    assert set(lasso_screen(Y, X, 4).selected) == set(sis_screen(Y, X, 4).selected)


def test_lasso_screen_pads_on_rank_one_design():
    rng = np.random.default_rng(4)
    X = np.outer(rng.standard_normal(10), rng.uniform(0.5, 2.0, size=6))
    Y = rng.standard_normal(10)
    res = lasso_screen(Y, X, 4)
    assert res.padded
    assert len(set(res.selected)) == 4
    assert lasso_screen(Y, X, 4).selected == res.selected


def test_lasso_screen_experiment_one_small_k():
    n, p, k = 50, 5000, 2
    theta = make_theta_experiment(k, p, 4, n)
    full = 0
    reps = 40
    for r in range(reps):
        rng = replicate_rng(41, r)
        X = rng.standard_normal((n, p))
        Y = X[:, :k] @ theta.values + rng.standard_normal(n)
        full += power_metric(lasso_screen(Y, X, 50).selected, theta.support) == 1.0
    assert full / reps >= 0.95


def test_screening_csv():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((10, 6))
    text = sis_screen(rng.standard_normal(10), X, 2).to_csv()
    assert text.splitlines()[0] == "method,rank,index,score"
    assert len(text.splitlines()) == 3


def test_power_curve_validation_and_csv():
    c = PowerCurve("SIS", [1, 2], [1.0, 0.5], [0.0, 0.1], 10)
    assert c.to_csv().splitlines() == ["k,power,stderr,replicates", "1,1.000000,0.000000,10",
                                       "2,0.500000,0.100000,10"]
    with pytest.raises(ValueError):
        PowerCurve("SIS", [1], [1.5], [0.0], 10)
    with pytest.raises(ValueError):
        PowerCurve("SIS", [1], [0.5], [-0.1], 10)
