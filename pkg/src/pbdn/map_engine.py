"""Stochastic MAP training of a single iSHM.

Minimizes the minibatch objective

    sum_k (-(gamma0/K) ln r_k + c0 r_k)
      + (a_beta + 1/2) sum_{v,k} ln(1 + beta_vk^2 / (2 b_beta))
      + (N/M) sum_i [-y_i ln(1 - exp(-lambda_i)) + (1 - y_i) lambda_i]

over (beta, ln r) with bias-corrected first/second moment steps, pruning
hyperplanes that no example activates.
"""
from dataclasses import dataclass
import warnings

import numpy as np

from .errors import ParameterDomainError
from .model import IshmModel, _loglik_from_rate, sigmoid, softplus
from .rng import RngStream

LAMBDA_FLOOR = 1e-12


@dataclass
class MapConfig:
    minibatch_size: int = 100
    num_batches: int = 4000
    base_lr: float = 0.05
    layer_index: int = 1
    prune_every: int = 500
    k_max: int = None
    seed: int = 0
    moment_decay_1: float = 0.9
    moment_decay_2: float = 0.999
    lr_epsilon: float = 1e-8
    init_scale: float = 0.1

    def __post_init__(self):
        if not (0 < self.moment_decay_1 < 1 and 0 < self.moment_decay_2 < 1):
            raise ParameterDomainError("moment decays must lie in (0, 1)")
        if self.minibatch_size < 1 or self.num_batches < 1 or self.prune_every < 1:
            raise ParameterDomainError("batch settings must be positive")

    @property
    def learning_rate(self):
        return self.base_lr / (4 + self.layer_index)


def _data_terms(beta, log_r, X, y):
    r = np.exp(log_r)
    psi = X @ beta
    sp = softplus(psi)
    lam = sp @ r
    return r, psi, sp, lam


def _prior_beta(beta, hp, l2):
    if l2 is not None:
        return 0.5 * l2 * np.sum(beta**2)
    return (hp.a_beta + 0.5) * np.sum(np.log1p(beta**2 / (2.0 * hp.b_beta_init)))


def _prior_beta_grad(beta, hp, l2):
    if l2 is not None:
        return l2 * beta
    b = hp.b_beta_init
    return (hp.a_beta + 0.5) * 2.0 * beta / (2.0 * b + beta**2)


def map_objective(params, batch, N, hp, l2=None):
    """Objective value at ``params = (beta, log_r)`` on a minibatch drawn from N examples."""
    beta, log_r = params
    X, y = batch.features, batch.labels
    M = X.shape[0]
    if M == 0:
        raise ValueError("empty minibatch")
    K = log_r.shape[0]
    r, _, _, lam = _data_terms(beta, log_r, X, y)
    prior = np.sum(-(hp.gamma0 / K) * log_r + hp.c0 * r) if K else 0.0
    prior += _prior_beta(beta, hp, l2)
    lam_pos = np.maximum(lam, LAMBDA_FLOOR)
    nll = np.where(y == 1, -np.log(-np.expm1(-lam_pos)), lam)
    return float(prior + (N / M) * np.sum(nll))


def map_gradient(params, batch, N, hp, l2=None):
    """Analytic gradient of :func:`map_objective`; returns (d_beta, d_log_r)."""
    beta, log_r = params
    X, y = batch.features, batch.labels
    M = X.shape[0]
    if M == 0:
        raise ValueError("empty minibatch")
    K = log_r.shape[0]
    r, psi, sp, lam = _data_terms(beta, log_r, X, y)
    # d NLL_i / d lambda_i
    g = np.where(y == 1, -1.0 / np.expm1(np.maximum(lam, LAMBDA_FLOOR)), 1.0) * (N / M)
    d_beta = X.T @ (g[:, None] * sigmoid(psi) * r)
    d_log_r = r * (sp.T @ g)
    if K:
        d_log_r = d_log_r - hp.gamma0 / K + hp.c0 * r
    d_beta = d_beta + _prior_beta_grad(beta, hp, l2)
    return d_beta, d_log_r


class _Moments:
    """Bias-corrected first/second moment step for one parameter array."""

    def __init__(self, shape, cfg):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.b1, self.b2, self.eps = cfg.moment_decay_1, cfg.moment_decay_2, cfg.lr_epsilon

    def step(self, grad, t, lr):
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        m_hat = self.m / (1 - self.b1**t)
        v_hat = self.v / (1 - self.b2**t)
        return lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def keep(self, mask, axis):
        self.m = np.compress(mask, self.m, axis=axis)
        self.v = np.compress(mask, self.v, axis=axis)


def sample_activations(beta, r, X, y, rng):
    """Draw b_ik ~ Bernoulli(p_ik) over all rows, then give every positive row
    with no active hyperplane one draw from Multinomial(1, p_i / sum_k p_ik)."""
    gen = rng.generator
    P = -np.expm1(-r * softplus(X @ beta))
    B = gen.random(P.shape) < P
    dead = np.flatnonzero((y == 1) & ~B.any(axis=1))
    if dead.size:
        W = P[dead]
        tot = W.sum(axis=1, keepdims=True)
        W = np.where(tot > 0, W / np.where(tot > 0, tot, 1.0), 1.0 / P.shape[1])
        cw = np.cumsum(W, axis=1)
        u = gen.random(dead.size)[:, None] * cw[:, -1:]
        pick = np.minimum((cw <= u).sum(axis=1), P.shape[1] - 1)
        B[dead, pick] = True
    return B


def run_map(data, hp, cfg, rng=None, label_flipped=False, trace=None, frozen_r=None, l2=None):
    """Train (beta, ln r) by minibatch descent; returns the final model.

    ``frozen_r`` fixes every weight at that value and disables pruning (with
    ``k_max=1`` this is L2-regularized logistic regression when ``l2`` is set).
    """
    X, y = data.features, data.labels
    if not np.any(y == 1):
        raise ValueError("training data needs at least one example labelled 1")
    rng = rng if rng is not None else RngStream(cfg.seed)
    N, D = X.shape
    K = cfg.k_max if cfg.k_max is not None else hp.k_max
    init = rng.split(0).generator
    beta = cfg.init_scale * init.standard_normal((D, K))
    log_r = np.full(K, np.log(frozen_r) if frozen_r is not None else -np.log(K))

    opt_beta = _Moments(beta.shape, cfg)
    opt_r = _Moments(log_r.shape, cfg)
    lr = cfg.learning_rate
    M = min(cfg.minibatch_size, N)
    order_rng = rng.split(1).generator
    prune_rng = rng.split(2)
    perm, cursor = order_rng.permutation(N), 0

    for t in range(1, cfg.num_batches + 1):
        if cursor + M > N:
            perm, cursor = order_rng.permutation(N), 0
        idx = perm[cursor : cursor + M]
        cursor += M
        batch = data.subset(idx)
        d_beta, d_log_r = map_gradient((beta, log_r), batch, N, hp, l2)
        beta = beta - opt_beta.step(d_beta, t, lr)
        if frozen_r is None:
            log_r = log_r - opt_r.step(d_log_r, t, lr)

        if frozen_r is None and t % cfg.prune_every == 0 and log_r.size:
            B = sample_activations(beta, np.exp(log_r), X, y, prune_rng.split(t))
            keep = B.any(axis=0)
            if not keep.all():
                beta, log_r = beta[:, keep], log_r[keep]
                opt_beta.keep(keep, axis=1)
                opt_r.keep(keep, axis=0)
        if trace is not None:
            trace(
                {
                    "iteration": t,
                    "k_active": int(log_r.size),
                    "log_likelihood": _full_log_likelihood(beta, log_r, X, y),
                    "objective": map_objective((beta, log_r), data, N, hp, l2),
                }
            )
        if log_r.size == 0:
            break

    if log_r.size == 0:
        warnings.warn("all hyperplanes were pruned; returning an empty model")
    return IshmModel.from_arrays(beta, np.exp(log_r), hp, label_flipped=label_flipped)


def _full_log_likelihood(beta, log_r, X, y):
    lam = softplus(X @ beta) @ np.exp(log_r) if log_r.size else np.zeros(X.shape[0])
    return float(np.sum(_loglik_from_rate(lam, y)))
