import math

import numpy as np
import pytest

from treesense import (Dictionary, SensingConfig, adaptive_sense,
                       adaptive_sense_coeffs, allocate_beta, make_tree,
                       random_tree_sparse, reconstruct_from_outcome,
                       two_stage_estimate, two_stage_estimate_coeffs)


def identity_dict(tree):
    return Dictionary(atoms=np.eye(tree.p), tree=tree)


def test_allocate_beta_values():
    assert allocate_beta(12, 2, 2) == pytest.approx(math.sqrt(2))
    assert allocate_beta(3 * 5, 2, 5) == pytest.approx(1.0)
    assert allocate_beta(16384, 2, 127) == pytest.approx(math.sqrt(16384 / 381))
    assert allocate_beta(16384, 2, 127) == pytest.approx(6.5576, abs=1e-3)
    with pytest.raises(ValueError):
        allocate_beta(0, 2, 2)
    with pytest.raises(ValueError):
        allocate_beta(1, 2, 0)


def test_noiseless_measurement_count_and_support(rng):
    # with correct tests the session halts at m = dk + 1
    t = make_tree(2, 5)
    for k in (1, 3, 7):
        vec = random_tree_sparse(t, k, 1.0, 2.0, rng, max_depth=t.depth - 1)
        cfg = SensingConfig(beta=1.0, tau=0.5, noise_std=0.0)
        out = adaptive_sense_coeffs(vec.values, t, cfg, rng)
        assert out.log.m == 2 * k + 1
        assert out.support_estimate == vec.support
        assert not out.truncated


def test_measured_set_is_support_plus_boundary(rng):
    t = make_tree(3, 4)
    k = 5
    vec = random_tree_sparse(t, k, 1.0, 1.0, rng, max_depth=t.depth - 1)
    cfg = SensingConfig(beta=1.0, tau=0.5, noise_std=0.0)
    out = adaptive_sense_coeffs(vec.values, t, cfg, rng)
    measured = set(out.log.measured_nodes())
    boundary = measured - vec.support
    assert len(boundary) == (t.d - 1) * k + 1
    assert boundary.isdisjoint(vec.support)


def test_zero_threshold_measures_everything(rng):
    t = make_tree(2, 4)
    v = np.zeros(t.p)
    cfg = SensingConfig(beta=1.0, tau=0.0, noise_std=0.0)
    out = adaptive_sense_coeffs(v, t, cfg, rng)
    assert out.log.m == t.p
    assert out.support_estimate == set(range(1, t.p + 1))


def test_zero_signal_stops_at_root(rng):
    t = make_tree(2, 4)
    cfg = SensingConfig(beta=1.0, tau=0.5, noise_std=0.0)
    out = adaptive_sense_coeffs(np.zeros(t.p), t, cfg, rng)
    assert out.log.m == 1
    assert out.support_estimate == frozenset()


def test_budget_exhaustion_flagged(rng):
    t = make_tree(2, 4)
    cfg = SensingConfig(beta=1.0, tau=0.0, noise_std=0.0, budget=4.5)
    out = adaptive_sense_coeffs(np.ones(t.p), t, cfg, rng)
    assert out.truncated
    assert out.log.m == 4
    assert out.log.energy_spent <= 4.5


def test_energy_accounting(rng):
    t = make_tree(2, 4)
    vec = random_tree_sparse(t, 3, 1, 1, rng, max_depth=3)
    cfg = SensingConfig(beta=1.7, tau=0.4, noise_std=1.0, budget=100.0)
    out = adaptive_sense_coeffs(vec.values, t, cfg, rng)
    assert out.log.energy_spent == pytest.approx(out.log.m * 1.7**2)
    assert out.log.energy_spent <= 100.0


def test_stack_and_queue_agree_noiseless(rng):
    t = make_tree(2, 5)
    for _ in range(20):
        vec = random_tree_sparse(t, 5, 0.8, 2.0, rng)
        outs = []
        for trav in ("stack", "queue"):
            cfg = SensingConfig(beta=1.0, tau=0.3, noise_std=0.0, traversal=trav)
            outs.append(adaptive_sense_coeffs(vec.values, t, cfg, rng))
        assert outs[0].support_estimate == outs[1].support_estimate
        assert outs[0].log.m == outs[1].log.m
        assert set(outs[0].log.measured_nodes()) == set(outs[1].log.measured_nodes())


def test_significance_flag_matches_threshold(rng):
    t = make_tree(2, 4)
    vec = random_tree_sparse(t, 4, 1, 2, rng)
    cfg = SensingConfig(beta=1.0, tau=0.9, noise_std=1.0)
    out = adaptive_sense_coeffs(vec.values, t, cfg, rng)
    nodes = out.log.measured_nodes()
    assert len(nodes) == len(set(nodes))
    for e in out.log.entries:
        assert e.significant == (abs(e.y) >= 0.9)
        assert (e.node in out.support_estimate) == e.significant


def test_reconstruction_noiseless_projection(rng):
    t = make_tree(2, 3)
    n = 10
    Q, _ = np.linalg.qr(rng.standard_normal((n, t.p)))
    d = Dictionary(atoms=Q, tree=t)
    vec = random_tree_sparse(t, 3, 1, 2, rng)
    x = Q @ vec.values
    cfg = SensingConfig(beta=2.0, tau=0.5, noise_std=0.0)
    out = adaptive_sense(x, d, cfg, rng)
    x_hat = reconstruct_from_outcome(out, d, beta=2.0)
    proj = sum((Q[:, j - 1] @ x) * Q[:, j - 1] for j in vec.support)
    assert np.allclose(x_hat, proj)


def test_reconstruction_single_atom():
    t = make_tree(2, 1)
    d = Dictionary(atoms=np.eye(1), tree=t)
    rng = np.random.default_rng(0)
    cfg = SensingConfig(beta=3.0, tau=0.1, noise_std=0.0)
    out = adaptive_sense(np.array([2.0]), d, cfg, rng)
    assert out.log.entries[0].y == pytest.approx(6.0)
    assert reconstruct_from_outcome(out, d, beta=3.0)[0] == pytest.approx(2.0)


def test_reconstruction_empty_support_is_mean(rng):
    t = make_tree(2, 3)
    d = identity_dict(t)
    mean = np.arange(7.0)
    cfg = SensingConfig(beta=1.0, tau=5.0, noise_std=0.0)
    out = adaptive_sense(np.zeros(7), d, cfg, rng)
    assert np.array_equal(reconstruct_from_outcome(out, d, 1.0, mean), mean)


def test_two_stage_noiseless_exact(rng):
    t = make_tree(2, 5)
    d = identity_dict(t)
    vec = random_tree_sparse(t, 4, 1, 2, rng, max_depth=4)
    out = two_stage_estimate(vec.values, d, 60.0, 4, rng,
                             alpha_min=1.0, noise_std=0.0)
    assert np.allclose(out.coeff_estimates, vec.values)
    assert out.log.m == 2 * 4 + 1


def test_two_stage_empty_support_zero_estimate(rng):
    t = make_tree(2, 4)
    out = two_stage_estimate_coeffs(np.zeros(t.p), t, 30.0, 3, rng,
                                    alpha_min=1.0, noise_std=0.0)
    assert np.all(out.coeff_estimates == 0)


def test_two_stage_error_matches_variance_prediction(rng):
    # with split 0.5 and exact stage-1 recovery, E||est - alpha||^2 = 2k^2 s^2/R
    t = make_tree(2, 5)
    k, R = 7, 800.0
    beta1 = allocate_beta(0.5 * R, 2, k)
    alpha_amp = 12.0 / beta1  # comfortably above threshold
    errs = []
    for _ in range(400):
        vec = random_tree_sparse(t, k, alpha_amp, alpha_amp, rng, max_depth=4)
        out = two_stage_estimate_coeffs(vec.values, t, R, k, rng,
                                        alpha_min=alpha_amp, noise_std=1.0)
        errs.append(np.sum((out.coeff_estimates - vec.values) ** 2))
    predicted = 2 * k**2 / R
    assert np.mean(errs) == pytest.approx(predicted, rel=0.25)


def test_config_validation():
    with pytest.raises(ValueError):
        SensingConfig(beta=0.0, tau=0.1)
    with pytest.raises(ValueError):
        SensingConfig(beta=1.0, tau=-0.1)
    with pytest.raises(ValueError):
        SensingConfig(beta=1.0, tau=0.1, traversal="random")
