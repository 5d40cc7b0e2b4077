"""Gibbs sampler for a single iSHM.

Hyperplane-specific updates in a sweep are independent given the count
partition, so each one draws from its own stream derived from (sweep, k).
Results do not depend on the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import warnings

import numpy as np

from .errors import NumericalStabilityError, ParameterDomainError
from .model import IshmModel, _loglik_from_rate, sigmoid, softplus
from .rng import (
    _TINY,
    RngStream,
    sample_crt,
    sample_gamma,
    sample_multinomial_partition,
    sample_mvn_from_precision,
    sample_polya_gamma,
    sample_truncated_poisson,
)


@dataclass
class GibbsConfig:
    iterations: int = 5000
    burn_fraction: float = 0.5
    prune_every: int = 200
    k_max: int = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.iterations < 1 or self.prune_every < 1:
            raise ParameterDomainError("iterations and prune_every must be positive")
        if self.prune_every > self.iterations:
            raise ParameterDomainError("prune_every must not exceed iterations")
        if not 0 <= self.burn_fraction < 1:
            raise ParameterDomainError("burn_fraction must lie in [0, 1)")


@dataclass
class GibbsState:
    """All latent variables of one sampler; columns index active hyperplanes."""

    m: np.ndarray  # (N,)
    m_k: np.ndarray  # (N, K)
    theta: np.ndarray  # (N, K)
    omega: np.ndarray  # (N, K)
    alpha: np.ndarray  # (D, K)
    b_beta: np.ndarray  # (K,)
    l: np.ndarray  # (N, K)
    l_tilde: np.ndarray  # (K,)
    p_tilde: np.ndarray  # (K,)
    gamma0: float
    c0: float
    r: np.ndarray  # (K,)
    beta: np.ndarray  # (D, K)
    ids: np.ndarray  # original hyperplane indices, stable under pruning

    @property
    def n_active(self):
        return self.r.shape[0]

    def keep(self, mask):
        """Drop hyperplanes where ``mask`` is False, compacting every per-k array."""
        for name in ("m_k", "theta", "omega", "l"):
            setattr(self, name, getattr(self, name)[:, mask])
        self.alpha = self.alpha[:, mask]
        self.beta = self.beta[:, mask]
        for name in ("b_beta", "l_tilde", "p_tilde", "r", "ids"):
            setattr(self, name, getattr(self, name)[mask])


def init_state(X, y, hp, k_max, rng):
    """beta = 0 and r_k = 1/K_max; theta drawn from its prior given that start."""
    N, D = X.shape
    K = int(k_max)
    r = np.full(K, 1.0 / K)
    theta = sample_gamma(np.broadcast_to(r, (N, K)), 1.0, rng)
    m = np.asarray(y, dtype=np.int64).copy()
    zeros = np.zeros((N, K), dtype=np.int64)
    return GibbsState(
        m=m,
        m_k=zeros.copy(),
        theta=theta,
        omega=np.zeros((N, K)),
        alpha=np.ones((D, K)),
        b_beta=np.full(K, hp.b_beta_init),
        l=zeros.copy(),
        l_tilde=np.zeros(K, dtype=np.int64),
        p_tilde=np.zeros(K),
        gamma0=hp.gamma0,
        c0=hp.c0,
        r=r,
        beta=np.zeros((D, K)),
        ids=np.arange(K),
    )


# conditional samplers, each usable on its own with everything else frozen


def conditional_theta(r_k, m_k, psi_k, rng):
    """theta_ik ~ Gamma(r_k + m_ik, scale = sigmoid(psi_ik))."""
    return sample_gamma(r_k + m_k, np.maximum(sigmoid(psi_k), _TINY), rng)


def conditional_alpha(beta_k, b_beta_k, a_beta, rng):
    return sample_gamma(a_beta + 0.5, 1.0 / (b_beta_k + 0.5 * beta_k**2), rng)


def conditional_b_beta(alpha_k, hp, rng):
    D = np.shape(alpha_k)[0]
    return sample_gamma(hp.e0 + hp.a_beta * D, 1.0 / (hp.f0 + np.sum(alpha_k)), rng)


def conditional_c0(gamma0, r, hp, rng):
    return sample_gamma(hp.e0 + gamma0, 1.0 / (hp.f0 + np.sum(r)), rng)


def conditional_r(gamma0, K, l_dot, c0, softplus_sum, rng):
    """r_k ~ Gamma(gamma0/K + l_.k, 1 / (c0 + sum_i softplus(psi_ik)))."""
    return sample_gamma(gamma0 / K + np.asarray(l_dot), 1.0 / (c0 + np.asarray(softplus_sum)), rng)


def conditional_gamma0(l_tilde_total, softplus_sum, c0, K, hp, rng):
    # -ln(1 - p_tilde_k) = ln(1 + S_k / c0)
    neg_log = np.log1p(np.asarray(softplus_sum) / c0)
    return sample_gamma(hp.a0 + l_tilde_total, 1.0 / (hp.b0 + np.sum(neg_log) / K), rng)


def beta_precision_and_shift(X, omega_k, m_k, r_k, alpha_k):
    precision = np.diag(alpha_k) + (X.T * omega_k) @ X
    shift = X.T @ ((m_k - r_k) / 2.0)
    return precision, shift


def conditional_beta(X, omega_k, m_k, r_k, alpha_k, rng):
    precision, shift = beta_precision_and_shift(X, omega_k, m_k, r_k, alpha_k)
    return sample_mvn_from_precision(precision, shift, rng)


def _update_hyperplane(k, state, X, hp, stream):
    m_k = state.m_k[:, k]
    r_k = state.r[k]
    psi = X @ state.beta[:, k]
    omega = sample_polya_gamma(m_k + r_k, psi, stream)
    try:
        beta = conditional_beta(X, omega, m_k, r_k, state.alpha[:, k], stream)
    except NumericalStabilityError as exc:
        raise NumericalStabilityError(
            f"beta draw failed for hyperplane {state.ids[k]}", hyperplane=int(state.ids[k])
        ) from exc
    psi = X @ beta
    theta = conditional_theta(r_k, m_k, psi, stream)
    alpha = conditional_alpha(beta, state.b_beta[k], hp.a_beta, stream)
    b_beta = conditional_b_beta(alpha, hp, stream)
    l_k = sample_crt(m_k, r_k, stream)
    return omega, beta, theta, alpha, b_beta, l_k, float(np.sum(softplus(psi)))


def gibbs_step(state, X, y, hp, rng, executor=None):
    """One full sweep over all latent variables; updates ``state`` in place and returns it.

    ``rng`` is the stream for this sweep; hyperplane k draws from
    ``rng.split(1, id_k)`` and the global updates from ``rng.split(2)``.
    """
    N, _ = X.shape
    K = state.n_active
    if K == 0:
        return state
    local = rng.split(0)

    pos = np.flatnonzero(y == 1)
    m = np.zeros(N, dtype=np.int64)
    if pos.size:
        m[pos] = sample_truncated_poisson(state.theta[pos].sum(axis=1), local)
    state.m = m
    state.m_k = sample_multinomial_partition(m, state.theta, local)

    streams = [rng.split(1, int(state.ids[k])) for k in range(K)]
    args = [(k, state, X, hp, streams[k]) for k in range(K)]
    if executor is None:
        results = [_update_hyperplane(*a) for a in args]
    else:
        results = list(executor.map(lambda a: _update_hyperplane(*a), args))

    S = np.empty(K)
    for k, (omega, beta, theta, alpha, b_beta, l_k, s_k) in enumerate(results):
        state.omega[:, k] = omega
        state.beta[:, k] = beta
        state.theta[:, k] = theta
        state.alpha[:, k] = alpha
        state.b_beta[k] = b_beta
        state.l[:, k] = l_k
        S[k] = s_k

    glob = rng.split(2)
    l_dot = state.l.sum(axis=0)
    state.p_tilde = S / (state.c0 + S)
    state.l_tilde = np.asarray(sample_crt(l_dot, state.gamma0 / K, glob), dtype=np.int64)
    state.gamma0 = conditional_gamma0(state.l_tilde.sum(), S, state.c0, K, hp, glob)
    state.r = np.asarray(conditional_r(state.gamma0, K, l_dot, state.c0, S, glob), dtype=np.float64)
    state.c0 = conditional_c0(state.gamma0, state.r, hp, glob)
    return state


def prune(state):
    """Remove hyperplanes with no assigned counts; returns the number removed."""
    active = state.m_k.sum(axis=0) > 0
    removed = int((~active).sum())
    if removed:
        state.keep(active)
    return removed


def state_log_likelihood(state, X, y):
    if state.n_active == 0:
        lam = np.zeros(X.shape[0])
    else:
        lam = softplus(X @ state.beta) @ state.r
    return float(np.sum(_loglik_from_rate(lam, y)))


def run_gibbs(data, hp, cfg, rng=None, label_flipped=False, trace=None):
    """Run the sampler and return the highest-likelihood post-burn-in sample as a model.

    ``trace``, if given, is called once per sweep with a dict holding the
    iteration, the number of active hyperplanes and the training log-likelihood.
    """
    X, y = data.features, data.labels
    if not np.any(y == 1):
        raise ValueError("training data needs at least one example labelled 1")
    rng = rng if rng is not None else RngStream(cfg.seed)
    k_max = cfg.k_max if cfg.k_max is not None else hp.k_max
    state = init_state(X, y, hp, k_max, rng.split(0))
    burn = int(cfg.burn_fraction * cfg.iterations)
    best_ll, best = -np.inf, None

    executor = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for it in range(1, cfg.iterations + 1):
            gibbs_step(state, X, y, hp, rng.split(1, it), executor)
            if it % cfg.prune_every == 0:
                prune(state)
            need_ll = it > burn or trace is not None
            ll = state_log_likelihood(state, X, y) if need_ll else None
            if trace is not None:
                trace({"iteration": it, "k_active": state.n_active, "log_likelihood": ll})
            if it > burn and (best is None or ll > best_ll):
                best_ll, best = ll, (state.beta.copy(), state.r.copy())
            if state.n_active == 0:
                break
    finally:
        if executor is not None:
            executor.shutdown()

    if state.n_active == 0:
        warnings.warn("all hyperplanes were pruned; returning an empty model")
        best = (np.zeros((X.shape[1], 0)), np.zeros(0))
    elif best is None:
        best = (state.beta.copy(), state.r.copy())
    return IshmModel.from_arrays(best[0], best[1], hp, label_flipped=label_flipped)
