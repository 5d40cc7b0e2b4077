"""Seeded random streams and the distribution samplers used by the Gibbs engine.

All samplers accept numpy arrays (broadcast elementwise) as well as scalars,
and return a Python scalar when every input is scalar and ``size`` is None.
"""
import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import kernels
from .errors import DegenerateWeightsError, NumericalStabilityError, ParameterDomainError

_TINY = np.finfo(np.float64).tiny
_UINT64 = (1 << 64) - 1

# zero-truncated Poisson: inversion below this rate, rejection above
_ZTP_INVERSION_MAX = 50.0
_ZTP_MAX_STEPS = 10_000
_ZTP_UNDERFLOW = 1e-12

PG_TRUNCATION = 5


class RngStream:
    """A reproducible random stream that can be split into independent children.

    Backed by PCG64 (128-bit state) seeded through :class:`numpy.random.SeedSequence`;
    ``split(i, j, ...)`` derives a child from the parent seed plus the index path,
    independent of how much the parent has already been consumed.
    """

    def __init__(self, seed=0, key=()):
        self.seed = int(seed) & _UINT64
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def split(self, *index):
        return RngStream(self.seed, self.key + tuple(index))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


def _as_stream(rng):
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(rng).generator


def _finish(out, scalar):
    if scalar:
        return out.reshape(()).item()
    return out


def _standard_gamma(shape, gen):
    """Gamma(shape, 1) draws; shapes below one use the boosting identity."""
    shape = np.asarray(shape, dtype=np.float64)
    small = shape < 1.0
    draws = np.asarray(gen.standard_gamma(np.where(small, shape + 1.0, shape)), dtype=np.float64)
    u = gen.random(shape.shape)
    if np.any(small):
        with np.errstate(divide="ignore", over="ignore"):
            boost = np.exp(np.log(u) / np.where(small, shape, 1.0))
        draws = np.where(small, draws * boost, draws)
    return np.maximum(draws, _TINY)


def sample_gamma(shape, scale, rng, size=None):
    """Draw from Gamma(shape, scale), mean ``shape * scale``."""
    shape = np.asarray(shape, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if np.any(~(shape > 0)) or np.any(~(scale > 0)):
        raise ParameterDomainError("gamma shape and scale must be positive")
    scalar = size is None and shape.ndim == 0 and scale.ndim == 0
    if size is not None:
        shape = np.broadcast_to(shape, size)
    shape, scale = np.broadcast_arrays(shape, scale)
    out = np.maximum(_standard_gamma(shape, _as_stream(rng)) * scale, _TINY)
    return _finish(out, scalar)


def sample_truncated_poisson(rate, rng, size=None):
    """Draw m >= 1 from Poisson(rate) conditioned on m >= 1."""
    rate = np.asarray(rate, dtype=np.float64)
    if np.any(~(rate > 0)):
        raise ParameterDomainError("truncated Poisson rate must be positive")
    scalar = size is None and rate.ndim == 0
    if size is not None:
        rate = np.broadcast_to(rate, size)
    gen = _as_stream(rng)
    flat = np.ascontiguousarray(rate, dtype=np.float64).ravel()
    u = gen.random(flat.shape[0])
    out = np.ones(flat.shape[0], dtype=np.int64)

    mid = np.flatnonzero((flat >= _ZTP_UNDERFLOW) & (flat <= _ZTP_INVERSION_MAX))
    if mid.size:
        out[mid] = kernels.ztp_inversion(
            np.ascontiguousarray(flat[mid]), np.ascontiguousarray(u[mid]), _ZTP_MAX_STEPS
        )
    big = np.flatnonzero(flat > _ZTP_INVERSION_MAX)
    if big.size:
        draws = gen.poisson(flat[big])
        zero = draws == 0
        while np.any(zero):
            draws[zero] = gen.poisson(flat[big][zero])
            zero = draws == 0
        out[big] = draws
    return _finish(out.reshape(rate.shape), scalar)


def sample_crt(count, concentration, rng):
    """Chinese restaurant table count: sum of Bernoulli(c / (c + n - 1)), n = 1..count."""
    count = np.asarray(count)
    conc = np.asarray(concentration, dtype=np.float64)
    if np.any(count < 0):
        raise ParameterDomainError("CRT count must be non-negative")
    if np.any(~(conc > 0)):
        raise ParameterDomainError("CRT concentration must be positive")
    scalar = count.ndim == 0 and conc.ndim == 0
    count, conc = np.broadcast_arrays(count, conc)
    flat_count = np.ascontiguousarray(count, dtype=np.int64).ravel()
    flat_conc = np.ascontiguousarray(conc, dtype=np.float64).ravel()
    u = _as_stream(rng).random(int(flat_count.sum()))
    out = kernels.crt_counts(flat_count, flat_conc, u)
    return _finish(out.reshape(count.shape), scalar)


def _pg_moments(c):
    """Per-unit-shape mean and variance of PG(1, c), stable near c = 0."""
    c = np.abs(np.asarray(c, dtype=np.float64))
    small = c < 1e-2
    cs = np.where(small, 1.0, c)
    c2 = c * c
    with np.errstate(over="ignore"):
        half = cs / 2.0
        t = np.tanh(half)
        sech2 = 1.0 / np.cosh(half) ** 2
    mean = np.where(small, 0.25 - c2 / 48.0 + c2 * c2 / 480.0, t / (2.0 * cs))
    var = np.where(
        small,
        1.0 / 24.0 - c2 / 120.0 + 17.0 * c2 * c2 / 13440.0,
        (2.0 * t - cs * sech2) / (4.0 * cs**3),
    )
    return mean, var


def polya_gamma_moments(shape, tilt):
    """Analytic mean and variance of PG(shape, tilt)."""
    mean, var = _pg_moments(tilt)
    return np.asarray(shape) * mean, np.asarray(shape) * var


def sample_polya_gamma(shape, tilt, rng, size=None):
    """Approximate PG(shape, tilt) draw.

    Keeps the first five terms of the sum-of-gammas representation exactly and
    replaces the remaining tail with one gamma variate whose mean and variance
    equal those of the discarded terms.
    """
    b = np.asarray(shape, dtype=np.float64)
    c = np.asarray(tilt, dtype=np.float64)
    if np.any(~(b > 0)):
        raise ParameterDomainError("Polya-Gamma shape must be positive")
    scalar = size is None and b.ndim == 0 and c.ndim == 0
    if size is not None:
        b = np.broadcast_to(b, size)
    b, c = np.broadcast_arrays(b, c)
    gen = _as_stream(rng)

    k = np.arange(1, PG_TRUNCATION + 1, dtype=np.float64)
    c2 = (c * c)[..., None] / (4.0 * np.pi**2)
    denom = (k - 0.5) ** 2 + c2
    g = _standard_gamma(np.broadcast_to(b[..., None], denom.shape), gen)
    head = (g / denom).sum(axis=-1) / (2.0 * np.pi**2)

    mean1, var1 = _pg_moments(c)
    tail_mean = mean1 - (1.0 / denom).sum(axis=-1) / (2.0 * np.pi**2)
    tail_var = var1 - (1.0 / denom**2).sum(axis=-1) / (4.0 * np.pi**4)
    ok = (tail_mean > 0) & (tail_var > 0)
    tail_mean = np.where(ok, tail_mean, 1.0)
    tail_var = np.where(ok, tail_var, 1.0)
    # shape b*m^2/v and scale v/m reproduce tail mean b*m and variance b*v
    tail = _standard_gamma(b * tail_mean**2 / tail_var, gen) * (tail_var / tail_mean)
    out = head + np.where(ok, tail, 0.0)
    return _finish(out, scalar)


def sample_multinomial_partition(total, weights, rng):
    """Split ``total`` counts over categories with probabilities proportional to ``weights``.

    ``total`` may be a vector with one row of ``weights`` per entry, in which
    case an (N, K) count matrix is returned.
    """
    weights = np.asarray(weights, dtype=np.float64)
    total_arr = np.asarray(total)
    if weights.ndim == 0 or weights.shape[-1] < 1:
        raise ParameterDomainError("weights must have at least one entry")
    if np.any(total_arr < 0):
        raise ParameterDomainError("total must be non-negative")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ParameterDomainError("weights must be finite and non-negative")
    single = weights.ndim == 1
    W = np.ascontiguousarray(np.atleast_2d(weights))
    totals = np.ascontiguousarray(np.broadcast_to(total_arr, W.shape[:1]), dtype=np.int64)
    if np.any((totals > 0) & ~(W.sum(axis=1) > 0)):
        raise DegenerateWeightsError("all-zero weights with a positive total")
    u = _as_stream(rng).random(int(totals.sum()))
    out = kernels.partition_counts(totals, W, u)
    return out[0] if single else out


def sample_mvn_from_precision(precision, shift, rng):
    """Draw from N(precision^-1 shift, precision^-1) via a Cholesky factor of the precision."""
    P = np.asarray(precision, dtype=np.float64)
    h = np.asarray(shift, dtype=np.float64)
    D = h.shape[0]
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        jitter = 1e-8 * np.trace(P) / D
        try:
            L = np.linalg.cholesky(P + jitter * np.eye(D))
        except np.linalg.LinAlgError as exc:
            raise NumericalStabilityError("precision matrix is not positive definite") from exc
    mean = cho_solve((L, True), h)
    z = _as_stream(rng).standard_normal(D)
    return mean + solve_triangular(L.T, z, lower=False)
