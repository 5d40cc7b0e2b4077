"""Infinite support hyperplane machine: types and inference-free functions.

Inputs ``x`` always carry the bias as a leading constant-one coordinate, so a
model over V covariates has ``input_dim = V + 1``.
"""
from dataclasses import dataclass, field, replace
import warnings

import numpy as np

from .errors import DimensionError, ParameterDomainError

RATE_CLAMP = 1e3
SUBTYPE_MIN_MASS = 1e-12


def softplus(z):
    """ln(1 + e^z) without overflow."""
    z = np.asarray(z, dtype=np.float64)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return out.item() if out.ndim == 0 else out


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True)
class Hyperplane:
    beta: np.ndarray
    weight: float

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if not self.weight > 0:
            raise ParameterDomainError("hyperplane weight must be positive")
        if not np.all(np.isfinite(beta)):
            raise ParameterDomainError("hyperplane coefficients must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True)
class IshmHyperparams:
    """Priors and truncation level for one iSHM.

    Defaults are the Gibbs settings; :meth:`for_map` gives the fixed values
    used by the MAP objective.
    """

    gamma0: float = 1.0
    c0: float = 1.0
    a0: float = 0.01
    b0: float = 0.01
    e0: float = 1.0
    f0: float = 1.0
    a_beta: float = 1e-6
    b_beta_init: float = 1.0
    k_max: int = 20

    def __post_init__(self):
        for name in ("gamma0", "c0", "a0", "b0", "e0", "f0", "a_beta", "b_beta_init"):
            if not getattr(self, name) > 0:
                raise ParameterDomainError(f"{name} must be positive")
        if int(self.k_max) < 1:
            raise ParameterDomainError("k_max must be at least 1")

    @classmethod
    def for_map(cls, k_max=20):
        return cls(gamma0=1.0, c0=1.0, a_beta=1e-6, b_beta_init=1e-6, k_max=k_max)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class IshmModel:
    hyperplanes: list
    input_dim: int
    hyperparams: IshmHyperparams = field(default_factory=IshmHyperparams)
    label_flipped: bool = False

    def __post_init__(self):
        for h in self.hyperplanes:
            if h.beta.shape != (self.input_dim,):
                raise DimensionError(
                    f"hyperplane dimension {h.beta.shape[0]} != input_dim {self.input_dim}"
                )

    @classmethod
    def from_arrays(cls, beta, r, hyperparams=None, label_flipped=False, sort=True):
        """Build from a (D, K) coefficient matrix and K weights, ordered by descending weight."""
        beta = np.asarray(beta, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        order = np.argsort(-r, kind="stable") if sort else np.arange(r.shape[0])
        planes = [Hyperplane(beta[:, k].copy(), r[k]) for k in order]
        return cls(planes, beta.shape[0], hyperparams or IshmHyperparams(), label_flipped)

    @property
    def n_active(self):
        return len(self.hyperplanes)

    @property
    def beta(self):
        """Coefficients as a (D, K) matrix."""
        if not self.hyperplanes:
            return np.zeros((self.input_dim, 0))
        return np.stack([h.beta for h in self.hyperplanes], axis=1)

    @property
    def r(self):
        return np.array([h.weight for h in self.hyperplanes], dtype=np.float64)

    def with_hyperparams(self, hp):
        return replace(self, hyperparams=hp)


def _check_dim(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.input_dim:
        raise DimensionError(f"input has dimension {X.shape[-1]}, model expects {model.input_dim}")
    return X


def rate(model, x):
    """lambda = sum_k r_k softplus(beta_k' x); works on a vector or an (N, D) matrix."""
    X = _check_dim(model, x)
    if model.n_active == 0:
        out = np.zeros(X.shape[:-1])
    else:
        out = softplus(X @ model.beta) @ model.r
    out = np.asarray(out)
    return out.item() if out.ndim == 0 else out


def _prob_from_rate(lam):
    lam = np.minimum(np.asarray(lam, dtype=np.float64), RATE_CLAMP)
    return -np.expm1(-lam)


def prob_one(model, x):
    """P(y = 1 | x) = 1 - exp(-lambda)."""
    out = _prob_from_rate(rate(model, x))
    return out.item() if out.ndim == 0 else out


def _loglik_from_rate(lam, y):
    lam = np.asarray(lam, dtype=np.float64)
    y = np.asarray(y)
    with np.errstate(divide="ignore"):
        pos = np.log(-np.expm1(-np.minimum(lam, RATE_CLAMP)))
    return np.where(y == 1, pos, -lam)


def log_likelihood(model, x, y):
    """ln P(y | x): ln(1 - e^-lambda) for y = 1, -lambda for y = 0.

    A positive label at lambda = 0 gives -inf (never NaN).
    """
    out = _loglik_from_rate(rate(model, x), y)
    return out.item() if out.ndim == 0 else out


def total_log_likelihood(model, X, y):
    return float(np.sum(_loglik_from_rate(rate(model, X), y)))


def pair_prob_from_rates(lam_pos, lam_neg):
    lam_neg = np.minimum(np.asarray(lam_neg, dtype=np.float64), RATE_CLAMP)
    return (_prob_from_rate(lam_pos) + np.exp(-lam_neg)) / 2.0


def pair_prob_one(pair, x):
    """Average of the positive model's P(y=1) and the flipped model's P(y*=0)."""
    out = pair_prob_from_rates(rate(pair.model_pos, x), rate(pair.model_neg, x))
    return out.item() if out.ndim == 0 else out


def polytope_thresholds(model, p0):
    if not 0 < p0 < 1:
        raise ParameterDomainError("p0 must lie in (0, 1)")
    r = model.r
    # ln[(1 - p0)^(-1/r) - 1], with the power evaluated as expm1 for small r_k stability
    with np.errstate(over="ignore", divide="ignore"):
        return np.log(np.expm1(-np.log1p(-p0) / r))


def polytope_margin(model, x, p0):
    """Number of violated half-space inequalities beta_k' x <= ln[(1-p0)^(-1/r_k) - 1].

    Zero means ``x`` lies inside the convex polytope that bounds the region
    where P(y=1 | x) <= p0.
    """
    X = _check_dim(model, x)
    thresholds = polytope_thresholds(model, p0)
    if model.n_active == 0:
        out = np.zeros(X.shape[:-1], dtype=np.int64)
    else:
        out = (X @ model.beta > thresholds).sum(axis=-1)
    out = np.asarray(out)
    return int(out) if out.ndim == 0 else out


@dataclass
class Subtype:
    prototype: np.ndarray
    mass: float
    hyperplane_index: int


def extract_subtypes(model, data):
    """Per-hyperplane p_ik-weighted mean of the training covariates (bias dropped).

    Hyperplanes whose total activation is below ``SUBTYPE_MIN_MASS`` are
    omitted with a warning.
    """
    X = _check_dim(model, data.features)
    out = []
    if model.n_active == 0:
        return out
    P = -np.expm1(-model.r * softplus(X @ model.beta))
    mass = P.sum(axis=0)
    for k in range(model.n_active):
        if mass[k] < SUBTYPE_MIN_MASS:
            warnings.warn(f"hyperplane {k} has negligible activation; subtype omitted")
            continue
        proto = P[:, k] @ X[:, 1:] / mass[k]
        out.append(Subtype(proto, float(mass[k]), k))
    return out
