"""Closed-form load model: worked examples and algebraic properties."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnsload.model import (
    FullModelParams,
    MeasurementPoint,
    StubOnlyParams,
    aggregate_full_client_rate,
    aggregate_incoming_rate,
    cache_output_rate,
    full_model_load,
    stub_only_load,
)

rates = st.floats(min_value=1e-6, max_value=1e3, allow_nan=False)
ttls = st.floats(min_value=0.0, max_value=1e5, allow_nan=False)


class TestAggregation:
    def test_simple_sum(self):
        assert aggregate_incoming_rate([1.0, 2.0, 3.0]) == 6.0

    def test_empty_sum_is_zero(self):
        assert aggregate_incoming_rate([]) == 0.0

    def test_many_small_rates_accumulate_exactly(self):
        total = aggregate_incoming_rate([0.001] * 1000)
        assert abs(total - 1.0) < 1e-12

    def test_full_client_alias(self):
        assert aggregate_full_client_rate([0.5, 0.5]) == 1.0
        assert aggregate_full_client_rate([]) == 0.0

    def test_large_scale_sum(self):
        assert aggregate_full_client_rate([1.0] * 150_000) == 150_000.0

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            aggregate_incoming_rate([1.0, -0.5])


class TestCacheOutputRate:
    def test_zero_ttl_disables_caching(self):
        assert cache_output_rate(1.0, 0.0) == 1.0

    def test_unit_case(self):
        assert cache_output_rate(1.0, 1.0) == 0.5

    def test_zero_input_zero_output(self):
        assert cache_output_rate(0.0, 3600.0) == 0.0

    @given(a=rates, tau=st.floats(min_value=1e-3, max_value=1e5))
    def test_saturation_bound(self, a, tau):
        assert cache_output_rate(a, tau) < 1.0 / tau

    @given(a=rates, tau1=ttls, tau2=ttls)
    def test_strictly_decreasing_in_ttl(self, a, tau1, tau2):
        if tau1 == tau2:
            return
        lo, hi = sorted((tau1, tau2))
        assert cache_output_rate(a, hi) < cache_output_rate(a, lo)

    @given(a1=rates, a2=rates, tau=ttls)
    def test_strictly_increasing_in_rate(self, a1, a2, tau):
        if a1 == a2:
            return
        lo, hi = sorted((a1, a2))
        assert cache_output_rate(lo, tau) < cache_output_rate(hi, tau)

    @given(a1=rates, a2=rates, tau=st.floats(min_value=1e-3, max_value=1e4))
    def test_concave_in_rate(self, a1, a2, tau):
        mid = 0.5 * (a1 + a2)
        chord = 0.5 * (cache_output_rate(a1, tau) + cache_output_rate(a2, tau))
        assert cache_output_rate(mid, tau) >= chord - 1e-15

    def test_approaches_ceiling_for_large_rate(self):
        tau = 10.0
        assert cache_output_rate(1e12, tau) == pytest.approx(1.0 / tau, rel=1e-10)


class TestStubOnlyLoad:
    def test_worked_example(self):
        params = StubOnlyParams(n_resolvers=100, a_tilde=2.0)
        assert stub_only_load(params, 10.0) == pytest.approx(200.0 / 21.0, rel=1e-15)

    def test_single_resolver_no_caching(self):
        assert stub_only_load(StubOnlyParams(1, 1.0), 0.0) == 1.0

    def test_large_population(self):
        params = StubOnlyParams(n_resolvers=10_000, a_tilde=1.0)
        assert stub_only_load(params, 1800.0) == pytest.approx(10_000.0 / 1801.0, rel=1e-15)

    @given(a=rates, tau=ttls, n=st.integers(min_value=1, max_value=10**6))
    def test_aggregate_is_n_identical_terms(self, a, tau, n):
        # Uniformity: the aggregate equals n times one per-resolver term, exactly.
        params = StubOnlyParams(n_resolvers=n, a_tilde=a)
        assert stub_only_load(params, tau) == n * cache_output_rate(a, tau)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            StubOnlyParams(n_resolvers=0, a_tilde=1.0)
        with pytest.raises(ValueError):
            StubOnlyParams(n_resolvers=10, a_tilde=0.0)


class TestFullModelLoad:
    def test_zero_ttl_example(self):
        assert full_model_load(FullModelParams(10, 1.0, 5.0), 0.0) == 15.0

    def test_unit_ttl_example(self):
        assert full_model_load(FullModelParams(10, 1.0, 5.0), 1.0) == 10.0

    def test_no_full_clients_reduces_to_stub(self):
        assert full_model_load(FullModelParams(10, 1.0, 0.0), 3.0) == 2.5

    @settings(max_examples=200)
    @given(a=rates, tau=ttls, n=st.integers(min_value=1, max_value=10**6))
    def test_zero_floor_bit_identical_to_stub(self, a, tau, n):
        full = full_model_load(FullModelParams(float(n), a, 0.0), tau)
        stub = stub_only_load(StubOnlyParams(n, a), tau)
        assert full == stub

    def test_negative_floor_rejected(self):
        with pytest.raises(ValueError):
            FullModelParams(10.0, 1.0, -1.0)


class TestMeasurementPoint:
    def test_valid(self):
        p = MeasurementPoint(ttl=1000.0, observed_rate=5.5)
        assert p.ttl == 1000.0 and p.observed_rate == 5.5

    def test_negative_ttl_rejected(self):
        with pytest.raises(ValueError):
            MeasurementPoint(ttl=-1.0, observed_rate=1.0)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            MeasurementPoint(ttl=1.0, observed_rate=-1.0)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            MeasurementPoint(ttl=math.nan, observed_rate=1.0)
