import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbdn import _kernels_py, kernels

try:
    from pbdn import _kernels_c
except ImportError:
    _kernels_c = None

needs_ext = pytest.mark.skipif(_kernels_c is None, reason="compiled extension not built")


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


def test_crt_counts_uses_one_uniform_per_customer():
    # uniforms below c/(c+n-1) open a table; c=1 gives thresholds 1, 1/2, 1/3
    u = np.array([0.9, 0.4, 0.5])
    assert _kernels_py.crt_counts(np.array([3]), np.array([1.0]), u).tolist() == [2]


def test_ztp_inversion_small_values():
    # at rate 1, P(m=1 | m>=1) = e^-1 / (1 - e^-1) = 0.58198
    out = _kernels_py.ztp_inversion(np.array([1.0, 1.0]), np.array([0.5, 0.6]), 1000)
    assert out.tolist() == [1, 2]


@needs_ext
@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_backends_agree(n, k, seed):
    gen = np.random.default_rng(seed)
    counts = gen.poisson(2.0, n).astype(np.int64)
    conc = gen.gamma(1.0, 1.0, n)
    u = gen.random(int(counts.sum()))
    assert np.array_equal(_kernels_py.crt_counts(counts, conc, u), _kernels_c.crt_counts(counts, conc, u))
    rates = gen.uniform(1e-6, 50.0, n)
    v = gen.random(n)
    assert np.array_equal(_kernels_py.ztp_inversion(rates, v, 10_000), _kernels_c.ztp_inversion(rates, v, 10_000))
    W = np.ascontiguousarray(gen.gamma(0.5, 1.0, (n, k)))
    W[:, 0] += 1e-3
    assert np.array_equal(_kernels_py.partition_counts(counts, W, u), _kernels_c.partition_counts(counts, W, u))
