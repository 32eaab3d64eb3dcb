import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgematch.bridge import BridgeSpec, bridge_drift, bridge_score, sample_bridge_pair, sample_bridge_point
from bridgematch.core import root_stream, split_stream
from bridgematch.metrics import energy_distance

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False)  # subnormals lose relative precision
vec2 = st.lists(finite, min_size=2, max_size=2).map(np.array)


@settings(max_examples=50, deadline=None)
@given(vec2, vec2, st.floats(0.01, 5.0), st.integers(0, 2**32))
def test_pinned_at_both_ends(x0, x1, sigma, seed):
    spec = BridgeSpec(sigma, 2)
    np.testing.assert_array_equal(sample_bridge_point(spec, x0, x1, 0.0, root_stream(seed)), x0)
    np.testing.assert_array_equal(sample_bridge_point(spec, x0, x1, 1.0, root_stream(seed)), x1)


def test_midpoint_variance():
    spec = BridgeSpec(1.0, 1)
    n = 100_000
    x = sample_bridge_point(spec, np.zeros((n, 1)), np.zeros((n, 1)), 0.5, root_stream(3))
    assert 0.24 <= x.var(ddof=1) <= 0.26


@pytest.mark.parametrize("t", [0.1, 0.5, 0.9])
def test_moment_law(t):
    sigma, n = 1.3, 100_000
    x0, x1 = np.array([1.0, -2.0]), np.array([3.0, 0.5])
    spec = BridgeSpec(sigma, 2)
    x = sample_bridge_point(spec, np.tile(x0, (n, 1)), np.tile(x1, (n, 1)), t, root_stream(int(t * 10)))
    var = sigma**2 * t * (1 - t)
    se_mean = np.sqrt(var / n)
    se_var = var * np.sqrt(2.0 / (n - 1))
    assert np.all(np.abs(x.mean(axis=0) - ((1 - t) * x0 + t * x1)) < 4 * se_mean)
    assert np.all(np.abs(x.var(axis=0, ddof=1) - var) < 4 * se_var)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        sample_bridge_point(BridgeSpec(1.0, 2), np.zeros(2), np.zeros(3), 0.5, root_stream(0))


def test_pair_degenerate_cases():
    spec = BridgeSpec(1.0, 2)
    x0, x1 = np.array([1.0, 2.0]), np.array([-1.0, 0.0])
    xs, xt = sample_bridge_pair(spec, x0, x1, 0.4, 0.4, root_stream(1))
    np.testing.assert_array_equal(xs, xt)
    xs, _ = sample_bridge_pair(spec, x0, x1, 0.0, 0.7, root_stream(1))
    np.testing.assert_array_equal(xs, x0)
    xs, xt = sample_bridge_pair(spec, x0, x1, 1.0, 1.0, root_stream(1))
    np.testing.assert_array_equal(xs, x1)
    np.testing.assert_array_equal(xt, x1)
    with pytest.raises(ValueError):
        sample_bridge_pair(spec, x0, x1, 0.6, 0.5, root_stream(1))


def test_pair_covariance_matches_brownian_bridge():
    n, s, t = 100_000, 0.25, 0.5
    spec = BridgeSpec(1.0, 1)
    z = np.zeros((n, 1))
    xs, xt = sample_bridge_pair(spec, z, z, s, t, root_stream(9))
    cov = np.cov(xs[:, 0], xt[:, 0])[0, 1]
    # min(s, t) - s t = 0.125
    assert 0.115 <= cov <= 0.135


def test_pair_first_marginal_matches_point_law():
    n = 10_000
    spec = BridgeSpec(1.0, 2)
    x0 = np.tile([1.0, -1.0], (n, 1))
    x1 = np.tile([-2.0, 0.5], (n, 1))
    s = root_stream(4)
    a, _ = sample_bridge_pair(spec, x0, x1, 0.3, 0.8, split_stream(s, 0))
    b = sample_bridge_point(spec, x0, x1, 0.3, split_stream(s, 1))
    assert energy_distance(a, b) < 0.01


def test_drift_examples():
    np.testing.assert_array_equal(bridge_drift(np.array([0.3]), np.array([0.3]), 0.4), [0.0])
    assert bridge_drift(np.array([1.0]), np.array([0.0]), 0.5)[0] == 2.0
    np.testing.assert_array_equal(bridge_drift(np.array([2.0, 1.0]), np.array([0.5, 3.0]), 0.0), [1.5, -2.0])
    with pytest.raises(ValueError):
        bridge_drift(np.array([1.0]), np.array([0.0]), 1.0)


def test_score_examples():
    spec = BridgeSpec(1.0, 1)
    np.testing.assert_array_equal(bridge_score(np.array([0.7]), np.array([0.7]), 0.2, spec), [0.0])
    assert bridge_score(np.array([1.0]), np.array([0.0]), 0.5, spec)[0] == 2.0
    x1, xt = np.array([1.3, -0.4]), np.array([0.2, 0.9])
    s1 = bridge_score(x1, xt, 0.3, BridgeSpec(0.7, 2))
    s2 = bridge_score(x1, xt, 0.3, BridgeSpec(1.4, 2))
    np.testing.assert_array_equal(s1, 4 * s2)
    with pytest.raises(ValueError):
        bridge_score(x1, xt, 1.0, BridgeSpec(1.0, 2))


@settings(max_examples=200, deadline=None)
@given(vec2, vec2, st.floats(0.0, 0.999), st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]))
def test_drift_equals_sigma_squared_score_exactly(x1, xt, t, sigma):
    # powers of two: sigma^2 scaling is exact in floating point
    spec = BridgeSpec(sigma, 2)
    np.testing.assert_array_equal(bridge_drift(x1, xt, t), sigma**2 * bridge_score(x1, xt, t, spec))


@settings(max_examples=200, deadline=None)
@given(vec2, vec2, st.floats(0.0, 0.999), st.floats(0.05, 10.0))
def test_drift_equals_sigma_squared_score_any_sigma(x1, xt, t, sigma):
    spec = BridgeSpec(sigma, 2)
    lhs = bridge_drift(x1, xt, t)
    rhs = sigma**2 * bridge_score(x1, xt, t, spec)
    # at most five roundings separate the two sides (~5.6e-16 relative)
    np.testing.assert_allclose(rhs, lhs, rtol=1e-15, atol=0)
