import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbdn.data import Dataset, make_gaussians, make_two_spirals, standardize
from pbdn.errors import ParameterDomainError
from pbdn.map_engine import MapConfig, map_gradient, map_objective, run_map, sample_activations
from pbdn.model import IshmHyperparams
from pbdn.rng import RngStream

HP = IshmHyperparams.for_map()


def spirals():
    return standardize(make_two_spirals(200, rng=RngStream(0)))


def numeric_gradient(params, batch, N, hp, h=1e-5):
    grads = []
    for which in range(2):
        base = [p.copy() for p in params]
        g = np.zeros_like(base[which])
        for idx in np.ndindex(g.shape):
            up = [p.copy() for p in base]
            dn = [p.copy() for p in base]
            up[which][idx] += h
            dn[which][idx] -= h
            g[idx] = (map_objective(tuple(up), batch, N, hp) - map_objective(tuple(dn), batch, N, hp)) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def test_plug_in_objective():
    K, N = 4, 10
    batch = Dataset(np.array([[1.0, 0.3]]), [0])
    params = (np.zeros((2, K)), np.full(K, -np.log(K)))
    expected = N * np.log(2) + np.log(K) + 1
    assert np.isclose(map_objective(params, batch, N, HP), expected)


def test_doubling_n_doubles_data_term_only():
    batch = Dataset(np.array([[1.0, 0.3], [1.0, -1.0]]), [0, 1])
    params = (np.full((2, 3), 0.2), np.log(np.array([0.5, 0.2, 0.1])))
    zero = map_objective(params, batch, 0, HP)
    one = map_objective(params, batch, 50, HP) - zero
    two = map_objective(params, batch, 100, HP) - zero
    assert np.isclose(two, 2 * one)


def test_prior_gradient_vanishes_at_mode():
    K = 5
    batch = Dataset(np.array([[1.0]]), [0])
    params = (np.zeros((1, K)), np.full(K, np.log(1.0 / K)))
    _, d_log_r = map_gradient(params, batch, 0, HP)
    assert np.allclose(d_log_r, 0.0)


def test_beta_gradient_direction_at_zero():
    X = np.array([[1.0, 2.0]])
    r = np.array([0.3, 0.6])
    d_beta, _ = map_gradient((np.zeros((2, 2)), np.log(r)), Dataset(X, [0]), 1, HP)
    assert np.allclose(d_beta, np.outer(X[0], r / 2))


def test_gradient_matches_finite_differences():
    data = spirals()
    gen = np.random.default_rng(0)
    worst = 0.0
    for i in range(10):
        idx = gen.choice(data.n, 50, replace=False)
        beta = gen.normal(0, 1.0, (3, 4))
        log_r = gen.normal(-1.0, 0.5, 4)
        batch = data.subset(idx)
        analytic = map_gradient((beta, log_r), batch, data.n, HP)
        numeric = numeric_gradient((beta, log_r), batch, data.n, HP)
        err = relative_error(np.concatenate([a.ravel() for a in analytic]), np.concatenate([n.ravel() for n in numeric]))
        worst = max(worst, err)
    assert worst < 1e-5


def test_config_validation():
    with pytest.raises(ParameterDomainError):
        MapConfig(moment_decay_1=1.0)
    assert MapConfig(layer_index=3).learning_rate == pytest.approx(0.05 / 7)


def test_objective_decreases_early():
    data = spirals()
    rows = []
    run_map(data, HP, MapConfig(num_batches=100, prune_every=100), RngStream(1), trace=rows.append)
    obj = [r["objective"] for r in rows]
    assert np.mean(obj[-10:]) < np.mean(obj[:10])


def test_deterministic():
    data = make_gaussians(30, rng=RngStream(0))
    cfg = MapConfig(num_batches=300, prune_every=100)
    a = run_map(data, HP, cfg, RngStream(2))
    b = run_map(data, HP, cfg, RngStream(2))
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.r, b.r)


def test_frozen_weight_logistic_regression():
    data = standardize(make_gaussians(50, separation=4.0, rng=RngStream(3)))
    m = run_map(data, IshmHyperparams.for_map(1), MapConfig(num_batches=1500, k_max=1), RngStream(0), frozen_r=1.0, l2=1.0)
    assert m.n_active == 1 and m.r[0] == 1.0
    assert m.beta[1, 0] > 0.5


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_every_positive_row_gets_an_expert(K, N, seed):
    gen = np.random.default_rng(seed)
    X = np.column_stack([np.ones(N), gen.standard_normal(N)])
    y = gen.integers(0, 2, N)
    beta = gen.normal(-3.0, 2.0, (2, K))
    r = gen.gamma(0.2, 0.1, K) + 1e-6
    B = sample_activations(beta, r, X, y, RngStream(seed))
    assert np.all(B[y == 1].any(axis=1))
