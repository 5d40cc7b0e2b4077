import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbdn import stack as stk
from pbdn.data import Dataset, make_gaussians, standardize
from pbdn.errors import DimensionError
from pbdn.map_engine import MapConfig
from pbdn.model import IshmModel, pair_prob_one, prob_one
from pbdn.rng import RngStream


def random_pair(D, k_pos, k_neg, seed=0, layer=1):
    gen = np.random.default_rng(seed)
    pos = IshmModel.from_arrays(gen.normal(0, 1, (D, k_pos)), gen.gamma(1.0, 1.0, k_pos))
    neg = IshmModel.from_arrays(gen.normal(0, 1, (D, k_neg)), gen.gamma(1.0, 1.0, k_neg), label_flipped=True)
    return stk.IshmPair(pos, neg, layer)


def two_layer_stack(V=2, seed=0):
    p1 = random_pair(V + 1, 3, 2, seed)
    p2 = random_pair(1 + V + 5, 2, 2, seed + 1, layer=2)
    return stk.PbdnStack([p1, p2], [V, 5, 4], 2, [(1, 10.0), (2, 5.0)])


def test_dense_cost_arithmetic():
    # V=2, K_2=8, zero likelihood: 2*3*8 + 2*8
    assert stk._aic_from_parts([2, 8], 1, stk.dense_parameter_cost([2, 8], 1), 0.0) == 64.0


def test_extra_layer_same_likelihood_raises_aic():
    w = [2, 8, 6]
    one = stk._aic_from_parts(w, 1, stk.dense_parameter_cost(w, 1), -10.0)
    two = stk._aic_from_parts(w, 2, stk.dense_parameter_cost(w, 2), -10.0)
    assert two > one


def test_sparse_count_limits():
    B = np.array([[5.0, 0.01], [-0.02, 0.03]])
    assert stk.sparse_count(B, 1e-12) == 4
    assert stk.sparse_count(B, 1.0) == 0
    assert stk.sparse_count(B, 0.1) == 1
    assert stk.sparse_count(np.zeros((3, 0)), 0.1) == 0


def test_aic_eps_tends_to_aic_on_dense_weights():
    d = make_gaussians(20, rng=RngStream(0))
    pair = random_pair(3, 4, 4)
    s = stk.PbdnStack([pair], [2, 8], 1)
    assert np.isclose(stk.aic_eps(s, d, 1, 1e-12), stk.aic(s, d, 1))


def test_aic_matches_hand_computation():
    d = make_gaussians(15, rng=RngStream(1))
    s = two_layer_stack()
    X2 = stk.layer_inputs(s, d.covariates, 2)
    pair = s.pairs[1]
    ll = np.sum(np.log(np.where(d.labels == 1, pair_prob_one_pos(pair, X2), 1 - pair_prob_one_pos(pair, X2))))
    ll += np.sum(np.log(np.where(d.labels == 0, neg_prob(pair, X2), 1 - neg_prob(pair, X2))))
    expected = 2 * 3 * 5 + 2 * 6 * 4 + 2 * 4 - 2 * ll
    assert np.isclose(stk.aic(s, d, 2), expected)


def pair_prob_one_pos(pair, X):
    return prob_one(pair.model_pos, X)


def neg_prob(pair, X):
    return prob_one(pair.model_neg, X)


def test_complexity():
    s = stk.PbdnStack([random_pair(3, 4, 4)], [2, 8], 1)
    assert stk.complexity(s) == 8.0
    s2 = two_layer_stack()
    assert stk.complexity(s2, 1) < stk.complexity(s2, 2)


def test_propagate_zero_weights_gives_ln2():
    pair = stk.IshmPair(IshmModel.from_arrays(np.zeros((3, 2)), [1.0, 1.0]),
                        IshmModel.from_arrays(np.zeros((3, 1)), [1.0], label_flipped=True), 1)
    out = stk.propagate(pair, np.array([1.0, 0.3, -0.2]), np.array([0.3, -0.2]))
    assert out.shape == (1 + 2 + 3,)
    assert np.allclose(out[3:], np.log(2))
    with pytest.raises(DimensionError):
        stk.propagate(pair, np.ones(4), np.ones(3))


def test_depth_one_prediction_is_pair_probability():
    s = two_layer_stack()
    x = np.array([0.4, -1.1])
    assert np.isclose(stk.predict(s, x, 1), pair_prob_one(s.pairs[0], np.r_[1.0, x]))


def test_concat_modes():
    X, Xt = stk.first_layer_input(np.ones((2, 2)))
    H = np.full((2, 3), 0.5)
    assert stk.next_input(X, Xt, H, "full").shape == (2, 6)
    assert stk.next_input(X, Xt, H, "hidden-only").shape == (2, 4)
    assert stk.next_input(X, Xt, H, "cumulative").shape == (2, 6)


def test_serialization_round_trip(tmp_path):
    s = two_layer_stack()
    s.standardization = standardize(make_gaussians(5, rng=RngStream(0))).standardization
    stk.save(s, tmp_path / "m.json")
    back = stk.load(tmp_path / "m.json")
    assert stk.dumps(back) == stk.dumps(s)
    for a, b in zip(s.pairs, back.pairs):
        assert np.array_equal(a.beta, b.beta)
        assert np.array_equal(a.model_pos.r, b.model_pos.r)
    doc = json.loads(stk.dumps(s))
    assert doc["format"] == stk.FORMAT_VERSION
    assert len(doc["layers"][1]["pos"]["beta"]) == 2 * 8


def test_load_rejects_unknown_format():
    with pytest.raises(ValueError):
        stk.stack_from_dict({"format": "other"})


def test_grow_bookkeeping():
    d = standardize(make_gaussians(40, separation=2.0, rng=RngStream(2)))
    cfg = MapConfig(num_batches=200, prune_every=100, k_max=4)
    s = stk.grow(d, engine="map", max_layers=3, rng=RngStream(3), config=cfg, force_layers=True)
    widths = s.layer_widths
    for t, pair in enumerate(s.pairs, start=1):
        assert pair.width == widths[t]
        prev = widths[t - 2] if t >= 2 else 0
        assert pair.input_dim == prev + widths[t - 1] + 1
    values = [v for _, v in s.criterion_trace]
    assert all(a > b for a, b in zip(values[: s.selected_depth - 1], values[1 : s.selected_depth]))


def test_grow_single_layer():
    d = make_gaussians(20, rng=RngStream(0))
    s = stk.grow(d, max_layers=1, config=MapConfig(num_batches=50, prune_every=50, k_max=3))
    assert s.selected_depth == 1


def test_deepening_does_not_change_earlier_layers():
    d = standardize(make_gaussians(30, rng=RngStream(4)))
    cfg = MapConfig(num_batches=100, prune_every=50, k_max=3)
    a = stk.grow(d, max_layers=1, rng=RngStream(5), config=cfg)
    b = stk.grow(d, max_layers=2, rng=RngStream(5), config=cfg, force_layers=True)
    assert np.array_equal(a.pairs[0].beta, b.pairs[0].beta)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4), st.floats(1e-6, 0.5))
def test_sparse_cost_never_exceeds_dense(k_pos, k_neg, V, eps):
    pair = random_pair(V + 1, k_pos, k_neg)
    dense = stk.dense_parameter_cost([V, k_pos + k_neg], 1)
    assert stk.sparse_parameter_cost([pair], 1, eps) <= dense
