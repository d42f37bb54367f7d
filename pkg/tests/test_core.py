import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from signopt.core import (RngStream, inner, l1_norm, l2_norm_sq,
                          sample_gaussian, sign_vec)

finite_vectors = st.lists(
    st.floats(min_value=-1e100, max_value=1e100, allow_nan=False),
    min_size=1, max_size=16).map(np.array)


def test_sign_vec_examples():
    assert np.array_equal(sign_vec(np.array([3.0, -2.0])), [1.0, -1.0])
    assert np.array_equal(sign_vec(np.array([0.0, 0.0])), [0.0, 0.0])
    assert np.array_equal(sign_vec(np.array([-1e-300, 1e-300])), [-1.0, 1.0])


@given(finite_vectors)
def test_sign_vec_is_odd_and_idempotent(v):
    s = sign_vec(v)
    assert np.array_equal(sign_vec(-v), -s)
    assert np.array_equal(sign_vec(s), s)


def test_inner_examples():
    assert inner(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0
    v = np.array([1.5, -2.5, 3.0])
    assert inner(v, np.zeros(3)) == 0.0
    assert inner(sign_vec(v), v) == l1_norm(v)


def test_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        inner(np.zeros(2), np.zeros(3))


@given(finite_vectors)
def test_sign_inner_recovers_l1(v):
    if np.all(v != 0):
        assert inner(sign_vec(v), v) == pytest.approx(l1_norm(v), rel=1e-12)


def test_norms():
    v = np.array([3.0, -4.0])
    assert l1_norm(v) == 7.0
    assert l2_norm_sq(v) == 25.0
    assert l1_norm(np.zeros(3)) == 0.0
    e = np.array([0.0, 1.0, 0.0])
    assert l1_norm(e) == 1.0 and l2_norm_sq(e) == 1.0


def test_rng_reproducibility_bitwise():
    a = RngStream(12345, 7).normal(1000)
    b = RngStream(12345, 7).normal(1000)
    assert np.array_equal(a, b)
    c = RngStream(12345, 8).normal(1000)
    assert not np.array_equal(a, c)


def test_rng_derive_independent_and_deterministic():
    s = RngStream(99, 1)
    d1 = s.derive(5)
    d2 = RngStream(99, 1).derive(5)
    assert d1.stream_id == d2.stream_id
    assert np.array_equal(d1.normal(10), d2.normal(10))
    assert d1.stream_id != s.derive(6).stream_id


def test_sample_gaussian_degenerate_and_errors():
    rng = RngStream(0, 0)
    assert np.array_equal(sample_gaussian(4, 0.0, 0.0, rng), np.zeros(4))
    assert np.array_equal(sample_gaussian(3, 2.5, 0.0, rng), np.full(3, 2.5))
    with pytest.raises(ValueError):
        sample_gaussian(3, 0.0, -1.0, rng)


def test_sample_gaussian_moments():
    n = 10**6
    draws = sample_gaussian(n, 0.0, 1.0, RngStream(2024, 11))
    # mean within 3 standard errors of 0
    assert abs(draws.mean()) <= 3.0 / math.sqrt(n)
    draws2 = sample_gaussian(n, 0.0, 2.0, RngStream(2024, 12))
    var = draws2.var(ddof=1)
    # variance estimator SE for normal data: sigma^2 * sqrt(2/(n-1))
    se = 4.0 * math.sqrt(2.0 / (n - 1))
    assert abs(var - 4.0) <= 3.0 * se
