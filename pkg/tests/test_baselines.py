import numpy as np
import pytest

from treesense import (TrainingSet, gaussian_ensemble, is_tree_sparse,
                       lasso_reconstruct, lasso_solve, make_tree, model_cosamp,
                       pca_fit, pca_reconstruct, random_tree_sparse)
from conftest import cd_lasso


def test_ensemble_row_norms():
    ens = gaussian_ensemble(10, 50, budget=200.0, seed=3)
    norms = np.linalg.norm(ens.matrix, axis=1)
    assert np.allclose(norms, np.sqrt(200.0 / 10), rtol=1e-12)
    assert np.sum(ens.matrix**2) == pytest.approx(200.0)


def test_lasso_zero_when_penalty_dominates(rng):
    A = rng.standard_normal((12, 8))
    y = rng.standard_normal(12)
    lam = np.max(np.abs(A.T @ y)) * 1.0001
    assert np.all(lasso_solve(A, y, lam) == 0)


def test_lasso_overdetermined_noiseless(rng):
    t = make_tree(2, 3)
    ens = gaussian_ensemble(20, t.p, budget=20.0, seed=1)
    alpha = random_tree_sparse(t, 3, 0.5, 1.5, rng).values
    y = ens.matrix @ alpha
    a_hat, x_hat = lasso_reconstruct(ens, y, 1e-9, max_iters=3000, tol=1e-15)
    assert np.max(np.abs(x_hat - alpha)) < 1e-6


def test_lasso_matches_coordinate_descent(rng):
    A = rng.standard_normal((8, 5))
    y = rng.standard_normal(8)
    mine = lasso_solve(A, y, 0.1, max_iters=5000, tol=1e-14)
    oracle = cd_lasso(A, y, 0.1)
    assert np.max(np.abs(mine - oracle)) < 1e-3


def test_lasso_batched_matches_column_calls(rng):
    A = rng.standard_normal((10, 6))
    Y = rng.standard_normal((10, 4))
    batch = lasso_solve(A, Y, 0.2, max_iters=2000, tol=1e-14)
    for c in range(4):
        single = lasso_solve(A, Y[:, c], 0.2, max_iters=2000, tol=1e-14)
        assert np.max(np.abs(batch[:, c] - single)) < 1e-8


def test_cosamp_planted_recovery(rng):
    t = make_tree(2, 6)  # p = 63
    successes = 0
    for trial in range(10):
        ens = gaussian_ensemble(48, t.p, budget=float(t.p), seed=100 + trial)
        vec = random_tree_sparse(t, 8, 0.5, 1.5, rng)
        y = ens.matrix @ vec.values
        x_hat = model_cosamp(ens.matrix, y, 8, t, iters=20)
        assert is_tree_sparse(x_hat, t)
        if np.linalg.norm(y - ens.matrix @ x_hat) < 1e-6:
            successes += 1
            assert np.allclose(x_hat, vec.values, atol=1e-6)
    assert successes >= 8  # m >= 4k and well-conditioned: near-certain recovery


def test_cosamp_zero_measurements(rng):
    t = make_tree(2, 4)
    ens = gaussian_ensemble(10, t.p, budget=10.0, seed=0)
    assert np.all(model_cosamp(ens.matrix, np.zeros(10), 3, t) == 0)


def test_cosamp_k_equals_p_is_least_squares(rng):
    t = make_tree(2, 3)
    A = rng.standard_normal((20, t.p))
    alpha = rng.standard_normal(t.p)
    y = A @ alpha
    x_hat = model_cosamp(A, y, t.p, t, iters=5)
    assert np.max(np.abs(x_hat - alpha)) < 1e-8


def test_pca_exact_in_span(rng):
    tr = TrainingSet.from_raw(rng.standard_normal((20, 30)))
    model = pca_fit(tr, 4)
    assert np.max(np.abs(model.components.T @ model.components - np.eye(4))) <= 1e-8
    x = tr.mean + model.components @ np.array([1.0, -2.0, 0.5, 3.0])
    rec = pca_reconstruct(model, x, budget=50.0, rng=rng, noise_std=0.0)
    assert np.allclose(rec, x)


def test_pca_zero_components_returns_mean(rng):
    tr = TrainingSet.from_raw(rng.standard_normal((10, 12)))
    model = pca_fit(tr, 0)
    x = rng.standard_normal(10)
    assert np.array_equal(pca_reconstruct(model, x, 10.0, rng), tr.mean)


def test_pca_rejects_r_above_rank(rng):
    X = np.outer(rng.standard_normal(10), rng.standard_normal(6))
    tr = TrainingSet(data=X - X.mean(axis=1, keepdims=True), mean=X.mean(axis=1))
    with pytest.raises(ValueError):
        pca_fit(tr, 5)


def test_pca_noise_variance(rng):
    # E||x_hat - x_hat_noiseless||^2 = r^2 sigma^2 / R
    tr = TrainingSet.from_raw(rng.standard_normal((15, 40)))
    r, R = 6, 30.0
    model = pca_fit(tr, r)
    x = rng.standard_normal(15)
    clean = pca_reconstruct(model, x, R, rng, noise_std=0.0)
    errs = [np.sum((pca_reconstruct(model, x, R, rng, noise_std=1.0) - clean) ** 2)
            for _ in range(2000)]
    assert np.mean(errs) == pytest.approx(r * r / R, rel=0.15)


def test_pca_components_maximize_captured_variance(rng):
    tr = TrainingSet.from_raw(rng.standard_normal((12, 25)))
    r = 3
    model = pca_fit(tr, r)
    captured = np.sum((model.components.T @ tr.data) ** 2)
    for _ in range(100):
        Q, _ = np.linalg.qr(rng.standard_normal((12, r)))
        assert captured >= np.sum((Q.T @ tr.data) ** 2) - 1e-9
