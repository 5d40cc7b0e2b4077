"""Greedy layer-wise construction of a parsimonious Bayesian deep network.

Layer t trains a pair of iSHMs (labels y and 1 - y) on the input
x^(t) = [1, x~^(t-1), x~^(t)], where x~^(1) is the raw covariate vector and
x~^(0) is empty.  The pair's combined hyperplanes give the K_{t+1} hidden
units x~^(t+1) = softplus(B' x^(t)).  Layers are added while the information
criterion keeps falling.
"""
from dataclasses import dataclass, field
import json
import math
import warnings

import numpy as np

from .gibbs import GibbsConfig, run_gibbs
from .map_engine import MapConfig, run_map
from .model import (
    Hyperplane,
    IshmHyperparams,
    IshmModel,
    _loglik_from_rate,
    pair_prob_from_rates,
    rate,
    softplus,
)
from .data import Dataset, Standardization
from .errors import DimensionError
from .rng import RngStream

FORMAT_VERSION = "pbdn-stack/1"
CONCAT_MODES = ("full", "hidden-only", "cumulative")


@dataclass
class IshmPair:
    model_pos: IshmModel
    model_neg: IshmModel
    layer_index: int

    def __post_init__(self):
        if self.model_pos.input_dim != self.model_neg.input_dim:
            raise DimensionError("both models of a pair must share the input dimension")

    @property
    def input_dim(self):
        return self.model_pos.input_dim

    @property
    def width(self):
        """Number of hidden units this pair produces."""
        return self.model_pos.n_active + self.model_neg.n_active

    @property
    def beta(self):
        """(D, K_pos + K_neg) coefficients, positive model first."""
        return np.hstack([self.model_pos.beta, self.model_neg.beta])

    def hidden(self, X):
        return softplus(np.asarray(X) @ self.beta)


@dataclass
class PbdnStack:
    pairs: list
    layer_widths: list
    selected_depth: int
    criterion_trace: list = field(default_factory=list)
    concat: str = "full"
    criterion: str = "aic"
    epsilon: float = None
    standardization: object = None

    @property
    def input_covariates(self):
        return self.layer_widths[0]

    def truncated(self, depth):
        """A view that predicts with the first ``depth`` pairs."""
        return PbdnStack(
            self.pairs,
            self.layer_widths,
            depth,
            self.criterion_trace,
            self.concat,
            self.criterion,
            self.epsilon,
            self.standardization,
        )


def first_layer_input(x):
    """x^(1) = [1, x] and x~^(1) = x for raw covariates (no bias column)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return np.hstack([np.ones((x.shape[0], 1)), x]), x


def next_input(x_prev, x_tilde_prev, x_tilde_new, concat="full"):
    ones = np.ones((x_tilde_new.shape[0], 1))
    if concat == "full":
        return np.hstack([ones, x_tilde_prev, x_tilde_new])
    if concat == "hidden-only":
        return np.hstack([ones, x_tilde_new])
    if concat == "cumulative":
        return np.hstack([x_prev, x_tilde_new])
    raise ValueError(f"unknown concatenation {concat!r}")


def propagate(pair, x_prev, x_tilde_prev, concat="full"):
    """Map the pair's input x^(t) to the next layer's input x^(t+1).

    Accepts single vectors or row-stacked matrices.
    """
    single = np.ndim(x_prev) == 1
    X = np.atleast_2d(np.asarray(x_prev, dtype=np.float64))
    Xt = np.atleast_2d(np.asarray(x_tilde_prev, dtype=np.float64))
    if X.shape[1] != pair.input_dim:
        raise DimensionError(f"input dimension {X.shape[1]} != pair input {pair.input_dim}")
    if Xt.shape[0] != X.shape[0]:
        Xt = Xt.reshape(X.shape[0], -1)
    out = next_input(X, Xt, pair.hidden(X), concat)
    return out[0] if single else out


def layer_inputs(stack, covariates, depth):
    """Return x^(depth) for raw covariates (no bias column) as an (N, D_depth) matrix."""
    X, Xt = first_layer_input(covariates)
    if X.shape[1] != stack.input_covariates + 1:
        raise DimensionError(
            f"expected {stack.input_covariates} covariates, got {X.shape[1] - 1}"
        )
    for pair in stack.pairs[: depth - 1]:
        H = pair.hidden(X)
        X, Xt = next_input(X, Xt, H, stack.concat), H
    return X


def _pair_log_likelihood(pair, X, y):
    ll_pos = _loglik_from_rate(rate(pair.model_pos, X), y)
    ll_neg = _loglik_from_rate(rate(pair.model_neg, X), 1 - y)
    return float(np.sum(ll_pos) + np.sum(ll_neg))


def _aic_from_parts(widths, depth, param_cost, loglik):
    return param_cost + 2.0 * widths[depth] - 2.0 * loglik


def dense_parameter_cost(widths, depth):
    """sum_{t=1..T} 2 (K_t + 1) K_{t+1}, with widths = [K_1, K_2, ...]."""
    return float(sum(2 * (widths[t - 1] + 1) * widths[t] for t in range(1, depth + 1)))


def sparse_count(B, epsilon):
    """Entries with |B| > epsilon * max|B|; an empty matrix counts zero."""
    B = np.asarray(B)
    if B.size == 0:
        return 0
    bmax = np.max(np.abs(B))
    return int(np.sum(np.abs(B) > epsilon * bmax))


def sparse_parameter_cost(pairs, depth, epsilon):
    return float(
        sum(
            2 * (sparse_count(p.model_pos.beta, epsilon) + sparse_count(p.model_neg.beta, epsilon))
            for p in pairs[:depth]
        )
    )


def aic(stack, data, depth):
    """Dense criterion: layer costs + 2 K_{T+1} - 2 * (pair log-likelihood at layer T)."""
    X = layer_inputs(stack, data.covariates, depth)
    ll = _pair_log_likelihood(stack.pairs[depth - 1], X, data.labels)
    return _aic_from_parts(stack.layer_widths, depth, dense_parameter_cost(stack.layer_widths, depth), ll)


def aic_eps(stack, data, depth, epsilon):
    """Sparse criterion: parameter cost counts only coefficients above epsilon * max."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    X = layer_inputs(stack, data.covariates, depth)
    ll = _pair_log_likelihood(stack.pairs[depth - 1], X, data.labels)
    cost = sparse_parameter_cost(stack.pairs, depth, epsilon)
    return _aic_from_parts(stack.layer_widths, depth, cost, ll)


def predict_proba(stack, covariates, depth=None):
    depth = depth or stack.selected_depth
    X = layer_inputs(stack, covariates, depth)
    pair = stack.pairs[depth - 1]
    return pair_prob_from_rates(rate(pair.model_pos, X), rate(pair.model_neg, X))


def predict(stack, x, depth=None):
    """Class-1 probability for covariates ``x`` (vector or rows); label is p > 0.5."""
    p = predict_proba(stack, x, depth)
    return float(p[0]) if np.ndim(x) == 1 else p


def complexity(stack, depth=None):
    """Prediction cost in units of one (V+1)-dimensional inner product."""
    depth = depth or stack.selected_depth
    widths = [0, *stack.layer_widths]  # widths[t] = K_{t-1} shifted by one
    V = stack.layer_widths[0]
    return sum(
        (widths[t - 1] + widths[t] + 1) * widths[t + 1] / (V + 1) for t in range(1, depth + 1)
    )


def train_pair(data_t, hp, engine, layer_index, rng, config=None, trace=None):
    """Train the positive and flipped models of one layer on ``data_t``."""
    if engine == "gibbs":
        cfg = config or GibbsConfig()
        train = lambda d, s, flip: run_gibbs(d, hp, cfg, s, label_flipped=flip, trace=trace)
    elif engine in ("map", "sgd"):
        base = config or MapConfig()
        cfg = MapConfig(**{**base.__dict__, "layer_index": layer_index})
        train = lambda d, s, flip: run_map(d, hp, cfg, s, label_flipped=flip, trace=trace)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pos = train(data_t, rng.split(layer_index, 0), False)
        neg = train(data_t.flipped(), rng.split(layer_index, 1), True)
    return IshmPair(pos, neg, layer_index)


def grow(
    data,
    hp=None,
    engine="map",
    criterion="aic",
    epsilon=0.01,
    max_layers=10,
    rng=None,
    config=None,
    concat="full",
    force_layers=False,
    log=None,
):
    """Add iSHM pairs until the criterion stops falling (or ``max_layers`` is reached).

    With ``force_layers`` every layer up to ``max_layers`` is trained; the
    selected depth is still the last layer before the first rise.
    """
    if max_layers < 1:
        raise ValueError("max_layers must be at least 1")
    if concat not in CONCAT_MODES:
        raise ValueError(f"concat must be one of {CONCAT_MODES}")
    if hp is None:
        hp = IshmHyperparams.for_map() if engine in ("map", "sgd") else IshmHyperparams()
    rng = rng if rng is not None else RngStream(0)
    y = data.labels
    V = data.dim - 1
    stack = PbdnStack([], [V], 0, [], concat, criterion, epsilon if criterion == "aic_eps" else None)
    stack.standardization = data.standardization

    X, Xt = first_layer_input(data.covariates)
    prev = math.inf
    selected = None
    for t in range(1, max_layers + 1):
        pair = train_pair(Dataset(X, y), hp, engine, t, rng, config)
        if pair.width == 0:
            warnings.warn(f"layer {t}: both models pruned every hyperplane; stopping")
            stack.pairs.append(pair)
            stack.layer_widths.append(0)
            if selected is None:
                selected = max(t - 1, 1)
            break
        stack.pairs.append(pair)
        stack.layer_widths.append(pair.width)
        if criterion == "aic":
            value = aic(stack, data, t)
        else:
            value = aic_eps(stack, data, t, epsilon)
        stack.criterion_trace.append((t, value))
        if log is not None:
            log({"layer": t, "width": pair.width, "criterion": value})
        if selected is None and not value < prev:
            selected = t - 1
            if not force_layers:
                break
        prev = value
        H = pair.hidden(X)
        X, Xt = next_input(X, Xt, H, concat), H
    if selected is None:
        selected = len(stack.pairs)
    stack.selected_depth = max(selected, 1)
    return stack


# serialization


def _model_to_dict(model):
    return {
        "label_flipped": model.label_flipped,
        "input_dim": model.input_dim,
        "k": model.n_active,
        "r": model.r.tolist(),
        "beta": model.beta.T.ravel().tolist(),  # row k holds hyperplane k
    }


def _model_from_dict(d, hp):
    D, K = d["input_dim"], d["k"]
    B = np.asarray(d["beta"], dtype=np.float64).reshape(K, D)
    planes = [Hyperplane(B[k], w) for k, w in enumerate(d["r"])]
    return IshmModel(planes, D, hp, d["label_flipped"])


def stack_to_dict(stack):
    hp = stack.pairs[0].model_pos.hyperparams if stack.pairs else IshmHyperparams()
    return {
        "format": FORMAT_VERSION,
        "hyperparams": hp.to_dict(),
        "concat": stack.concat,
        "criterion": stack.criterion,
        "epsilon": stack.epsilon,
        "layer_widths": list(stack.layer_widths),
        "selected_depth": stack.selected_depth,
        "criterion_trace": [[t, v] for t, v in stack.criterion_trace],
        "standardization": stack.standardization.to_dict() if stack.standardization else None,
        "layers": [
            {
                "layer": p.layer_index,
                "beta_layout": "row-major (K, D)",
                "pos": _model_to_dict(p.model_pos),
                "neg": _model_to_dict(p.model_neg),
            }
            for p in stack.pairs
        ],
    }


def stack_from_dict(d):
    if d.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    hp = IshmHyperparams(**d["hyperparams"])
    pairs = [
        IshmPair(_model_from_dict(l["pos"], hp), _model_from_dict(l["neg"], hp), l["layer"])
        for l in d["layers"]
    ]
    std = d.get("standardization")
    return PbdnStack(
        pairs,
        list(d["layer_widths"]),
        d["selected_depth"],
        [(t, v) for t, v in d["criterion_trace"]],
        d.get("concat", "full"),
        d.get("criterion", "aic"),
        d.get("epsilon"),
        Standardization.from_dict(std) if std else None,
    )


def dumps(stack):
    return json.dumps(stack_to_dict(stack), indent=1, sort_keys=True) + "\n"


def save(stack, path):
    with open(path, "w") as fh:
        fh.write(dumps(stack))


def load(path):
    with open(path) as fh:
        return stack_from_dict(json.load(fh))
