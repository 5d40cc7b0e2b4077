import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pbdn.data import Dataset
from pbdn.errors import DimensionError, ParameterDomainError
from pbdn.model import (
    Hyperplane,
    IshmHyperparams,
    IshmModel,
    extract_subtypes,
    log_likelihood,
    pair_prob_one,
    polytope_margin,
    polytope_thresholds,
    prob_one,
    rate,
    sigmoid,
    softplus,
)
from pbdn.stack import IshmPair


def model(beta, r, flipped=False):
    return IshmModel.from_arrays(np.asarray(beta, float), np.asarray(r, float), label_flipped=flipped)


def test_single_unit_weight_is_logistic():
    m = model([[0.3], [-1.2]], [1.0])
    x = np.array([1.0, 0.7])
    assert np.isclose(prob_one(m, x), sigmoid(0.3 - 0.84), atol=1e-15)


def test_rate_is_weighted_softplus_sum():
    beta = np.array([[1.0, -2.0], [0.5, 0.25]])
    m = model(beta, [2.0, 0.5])
    x = np.array([1.0, 2.0])
    assert np.isclose(rate(m, x), 2.0 * np.log1p(np.e**2) + 0.5 * np.log1p(np.e**-1.5))


def test_hyperplanes_sorted_by_weight():
    m = model(np.eye(3), [0.1, 3.0, 1.0])
    assert m.r.tolist() == [3.0, 1.0, 0.1]
    assert np.array_equal(m.beta[:, 0], [0.0, 1.0, 0.0])


def test_empty_model_predicts_zero():
    m = IshmModel([], 3)
    assert prob_one(m, np.ones(3)) == 0.0
    assert log_likelihood(m, np.ones(3), 1) == -np.inf
    assert log_likelihood(m, np.ones(3), 0) == 0.0


def test_dimension_checked():
    with pytest.raises(DimensionError):
        rate(model(np.ones((3, 1)), [1.0]), np.ones(2))
    with pytest.raises(DimensionError):
        IshmModel([Hyperplane(np.ones(2), 1.0)], 3)


def test_hyperparams_validated():
    with pytest.raises(ParameterDomainError):
        IshmHyperparams(gamma0=0.0)
    with pytest.raises(ParameterDomainError):
        Hyperplane(np.ones(2), -1.0)


def test_pair_probability_average():
    pos = model([[0.2], [1.0]], [0.7])
    neg = model([[-0.1], [-1.0]], [1.3], flipped=True)
    x = np.array([1.0, 0.4])
    expected = (prob_one(pos, x) + 1 - prob_one(neg, x)) / 2
    assert np.isclose(pair_prob_one(IshmPair(pos, neg, 1), x), expected)


def test_large_rate_is_finite():
    m = model([[500.0]], [10.0])
    assert prob_one(m, np.ones(1)) == 1.0
    assert np.isfinite(log_likelihood(m, np.ones(1), 0))


def test_thresholds_frozen():
    # r=1, p0=0.5: ln((1/0.5)^1 - 1) = 0
    m = model(np.ones((2, 1)), [1.0])
    assert np.isclose(polytope_thresholds(m, 0.5)[0], 0.0)
    with pytest.raises(ParameterDomainError):
        polytope_thresholds(m, 1.0)


def test_subtypes_weighted_means():
    X = np.array([[1.0, 0.0], [1.0, 2.0], [1.0, 4.0]])
    data = Dataset(X, [0, 1, 1])
    m = model([[0.0], [1.0]], [1.0])
    (s,) = extract_subtypes(m, data)
    p = -np.expm1(-softplus(X[:, 1]))
    assert np.isclose(s.prototype[0], p @ X[:, 1] / p.sum())
    assert np.isclose(s.mass, p.sum())


def test_subtypes_skip_negligible_mass():
    data = Dataset(np.array([[1.0, 1.0]]), [1])
    m = model([[-800.0], [0.0]], [1.0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert extract_subtypes(m, data) == []
    assert caught


finite = st.floats(-8.0, 8.0)


@settings(max_examples=200, deadline=None)
@given(
    arrays(np.float64, (3, 4), elements=finite),
    arrays(np.float64, 4, elements=st.floats(0.01, 5.0)),
    arrays(np.float64, 3, elements=finite),
    st.sampled_from([0.3, 0.5, 0.8]),
)
def test_inside_polytope_when_probability_small(beta, r, x, p0):
    x = x.copy()
    x[0] = 1.0
    m = model(beta, r)
    assert 0.0 <= prob_one(m, x) <= 1.0
    if prob_one(m, x) <= p0:
        assert polytope_margin(m, x, p0) == 0
    # any single violated face already pushes the probability above p0
    if polytope_margin(m, x, p0) > 0:
        assert prob_one(m, x) > p0 - 1e-12


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (2, 3), elements=finite), arrays(np.float64, 3, elements=st.floats(0.01, 5.0)))
def test_probability_monotone_in_weights(beta, r):
    x = np.array([1.0, 0.5])
    a = prob_one(model(beta, r), x)
    b = prob_one(model(beta, 2 * r), x)
    assert b >= a - 1e-15
