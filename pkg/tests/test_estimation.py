"""Estimation: inversion examples, solver roundtrips, clustering."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dnsload.errors import (
    DegenerateTtls,
    InfeasibleMeasurement,
    NoFeasibleRoot,
    UnseparableClusters,
    ZeroDifference,
    ZeroResolvers,
)
from dnsload.estimation import (
    EstimateSource,
    RequestorObservation,
    RequestorPartition,
    classify_requestors,
    estimate_resolver_count,
    invert_single_measurement,
    predict_full,
    predict_stub_only,
    solve_three_measurement,
    solve_two_measurement,
)
from dnsload.model import FullModelParams, MeasurementPoint, full_model_load


def forward(n, a, d, tau):
    return full_model_load(FullModelParams(n, a, d), tau)


class TestSingleMeasurement:
    def test_exact_roundtrip(self):
        # Forward-evaluate with n=100, a=2 at ttl=10, then invert.
        m = MeasurementPoint(10.0, 200.0 / 21.0)
        est = invert_single_measurement(m, 100)
        assert est.a_tilde == pytest.approx(2.0, rel=1e-12)
        assert est.d_tilde == 0.0
        assert est.source is EstimateSource.SINGLE_MEASUREMENT

    def test_zero_ttl_is_rate_over_count(self):
        est = invert_single_measurement(MeasurementPoint(0.0, 7.0), 7)
        assert est.a_tilde == pytest.approx(1.0, rel=1e-15)

    def test_saturated_measurement_infeasible(self):
        with pytest.raises(InfeasibleMeasurement):
            invert_single_measurement(MeasurementPoint(100.0, 2.0), 100)

    def test_prediction_substitution(self):
        est = invert_single_measurement(MeasurementPoint(10.0, 200.0 / 21.0), 100)
        assert predict_stub_only(est, 10.0) == pytest.approx(200.0 / 21.0, rel=1e-12)
        assert predict_stub_only(est, 0.0) == pytest.approx(200.0, rel=1e-12)

    def test_prediction_roundtrip_at_measurement_ttl(self):
        b = 5.5525
        est = invert_single_measurement(MeasurementPoint(1000.0, b), 10_000)
        assert predict_stub_only(est, 1000.0) == pytest.approx(b, rel=1e-12)

    def test_predict_rejects_multi_measurement_estimates(self):
        est = solve_two_measurement(MeasurementPoint(0, 15), MeasurementPoint(1, 10), 10)
        with pytest.raises(ValueError):
            predict_stub_only(est, 5.0)


class TestTwoMeasurement:
    def test_exact_roundtrip_with_floor(self):
        est = solve_two_measurement(MeasurementPoint(0, 15.0), MeasurementPoint(1, 10.0), 10)
        assert est.a_tilde == pytest.approx(1.0, rel=1e-12)
        assert est.d_tilde == pytest.approx(5.0, rel=1e-12)
        assert est.source is EstimateSource.TWO_MEASUREMENT

    def test_zero_floor_boundary(self):
        est = solve_two_measurement(MeasurementPoint(0, 10.0), MeasurementPoint(1, 5.0), 10)
        assert est.a_tilde == pytest.approx(1.0, rel=1e-12)
        assert est.d_tilde == 0.0

    def test_equal_ttls_degenerate(self):
        with pytest.raises(DegenerateTtls):
            solve_two_measurement(MeasurementPoint(5, 3.0), MeasurementPoint(5, 4.0), 10)

    def test_flat_load_has_no_root(self):
        with pytest.raises(NoFeasibleRoot):
            solve_two_measurement(MeasurementPoint(0, 5.0), MeasurementPoint(100, 5.0), 10)

    def test_increasing_load_has_no_root(self):
        with pytest.raises(NoFeasibleRoot):
            solve_two_measurement(MeasurementPoint(0, 5.0), MeasurementPoint(100, 9.0), 10)

    def test_input_order_irrelevant(self):
        a = solve_two_measurement(MeasurementPoint(0, 15.0), MeasurementPoint(1, 10.0), 10)
        b = solve_two_measurement(MeasurementPoint(1, 10.0), MeasurementPoint(0, 15.0), 10)
        assert a == b

    def test_prediction_interpolates_measurements(self):
        m1, m2 = MeasurementPoint(60.0, 80.0), MeasurementPoint(600.0, 30.0)
        est = solve_two_measurement(m1, m2, 5000)
        assert predict_full(est, 60.0) == pytest.approx(80.0, rel=1e-9)
        assert predict_full(est, 600.0) == pytest.approx(30.0, rel=1e-9)


class TestThreeMeasurement:
    def test_exact_roundtrip(self):
        est = solve_three_measurement(
            MeasurementPoint(0, 15.0), MeasurementPoint(1, 10.0), MeasurementPoint(3, 7.5)
        )
        assert est.n_tilde == pytest.approx(10.0, rel=1e-12)
        assert est.a_tilde == pytest.approx(1.0, rel=1e-12)
        assert est.d_tilde == pytest.approx(5.0, rel=1e-12)
        assert est.source is EstimateSource.THREE_MEASUREMENT

    def test_zero_floor_boundary(self):
        est = solve_three_measurement(
            MeasurementPoint(0, 10.0), MeasurementPoint(1, 5.0), MeasurementPoint(3, 2.5)
        )
        assert est.n_tilde == pytest.approx(10.0, rel=1e-12)
        assert est.d_tilde == 0.0

    def test_flat_load_zero_difference(self):
        with pytest.raises(ZeroDifference):
            solve_three_measurement(
                MeasurementPoint(0, 5.0), MeasurementPoint(100, 5.0), MeasurementPoint(200, 5.0)
            )

    def test_any_equal_ttls_degenerate(self):
        with pytest.raises(DegenerateTtls):
            solve_three_measurement(
                MeasurementPoint(0, 15.0), MeasurementPoint(1, 10.0), MeasurementPoint(1, 9.0)
            )

    def test_prediction_examples(self):
        est = solve_three_measurement(
            MeasurementPoint(0, 15.0), MeasurementPoint(1, 10.0), MeasurementPoint(3, 7.5)
        )
        assert predict_full(est, 3.0) == pytest.approx(7.5, rel=1e-9)
        assert predict_full(est, 2.0) == pytest.approx(10.0 / 3.0 + 5.0, rel=1e-9)
        # At very large TTLs the resolver term vanishes and the floor remains.
        assert predict_full(est, 1e9) == pytest.approx(5.0, abs=1e-7)

    def test_grid_search_cannot_beat_closed_form(self):
        # Brute-force oracle: the closed-form solution's squared residual is
        # no larger than the best point of a 100^3 grid around the truth.
        taus = (0.0, 1.0, 3.0)
        true = (10.0, 1.0, 5.0)
        loads = np.array([forward(*true, tau) for tau in taus])

        ns = np.linspace(1.0, 20.0, 100)
        aas = np.linspace(0.05, 5.0, 100)
        ds = np.linspace(0.0, 10.0, 100)
        grid_n, grid_a, grid_d = np.meshgrid(ns, aas, ds, indexing="ij")
        residual = np.zeros_like(grid_n)
        for tau, load in zip(taus, loads):
            residual += (grid_n * grid_a / (1.0 + grid_a * tau) + grid_d - load) ** 2
        best_grid = residual.min()

        est = solve_three_measurement(*(MeasurementPoint(t, b) for t, b in zip(taus, loads)))
        closed_form = sum(
            (forward(est.n_tilde, est.a_tilde, est.d_tilde, tau) - load) ** 2
            for tau, load in zip(taus, loads)
        )
        assert closed_form <= best_grid


# Randomized roundtrips need measurable TTL separation and load differences
# that double precision can represent; otherwise the forward evaluation
# itself destroys the information the solver would need.
def _well_conditioned(n, a, d, taus, min_rel_delta=1e-8):
    loads = [forward(n, a, d, t) for t in taus]
    scale = max(loads)
    deltas = [abs(x - y) for x, y in zip(loads, loads[1:])] + [abs(loads[0] - loads[-1])]
    return min(deltas) / scale >= min_rel_delta


@settings(max_examples=150, deadline=None)
@given(
    n=st.floats(min_value=1.0, max_value=1e6),
    a=st.floats(min_value=1e-4, max_value=1e3),
    d=st.one_of(st.just(0.0), st.floats(min_value=1e-2, max_value=1e6)),
    t1=st.floats(min_value=0.0, max_value=1e5),
    gap12=st.floats(min_value=1.0, max_value=5e4),
    gap23=st.floats(min_value=1.0, max_value=5e4),
)
def test_three_measurement_roundtrip_property(n, a, d, t1, gap12, gap23):
    taus = (t1, t1 + gap12, t1 + gap12 + gap23)
    assume(_well_conditioned(n, a, d, taus))
    points = [MeasurementPoint(t, forward(n, a, d, t)) for t in taus]
    est = solve_three_measurement(*points)
    assert est.n_tilde == pytest.approx(n, rel=1e-6)
    assert est.a_tilde == pytest.approx(a, rel=1e-6)
    if d == 0.0:
        assert est.d_tilde <= 1e-6 * max(p.observed_rate for p in points)
    else:
        assert est.d_tilde == pytest.approx(d, rel=1e-6)


@settings(max_examples=150, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=10**6),
    a=st.floats(min_value=1e-4, max_value=1e3),
    d=st.one_of(st.just(0.0), st.floats(min_value=1e-2, max_value=1e6)),
    t1=st.floats(min_value=0.0, max_value=1e5),
    gap=st.floats(min_value=1.0, max_value=1e5),
)
def test_two_measurement_roundtrip_property(n, a, d, t1, gap):
    taus = (t1, t1 + gap)
    assume(_well_conditioned(n, a, d, taus))
    points = [MeasurementPoint(t, forward(n, a, d, t)) for t in taus]
    est = solve_two_measurement(points[0], points[1], n)
    assert est.a_tilde == pytest.approx(a, rel=1e-6)
    if d > 0.0:
        assert est.d_tilde == pytest.approx(d, rel=1e-6)


class TestClassification:
    def test_two_point_masses(self):
        obs = [RequestorObservation(f"r{i}", 1.0, 0.5) for i in range(5)]
        obs += [RequestorObservation(f"c{i}", 1.0, 1.0) for i in range(5)]
        partition = classify_requestors(obs)
        assert partition.resolvers == frozenset(f"r{i}" for i in range(5))
        assert partition.full_clients == frozenset(f"c{i}" for i in range(5))

    def test_identical_changes_unseparable(self):
        obs = [RequestorObservation(f"s{i}", 1.0, 0.8) for i in range(6)]
        with pytest.raises(UnseparableClusters):
            classify_requestors(obs)

    def test_close_centroids_unseparable(self):
        obs = [RequestorObservation(f"a{i}", 1.0, 0.50) for i in range(5)]
        obs += [RequestorObservation(f"b{i}", 1.0, 0.52) for i in range(5)]
        with pytest.raises(UnseparableClusters):
            classify_requestors(obs)

    def test_hand_computed_changes(self):
        # Resolver drops 2.0 -> 0.19 (change 0.905); full client jitters
        # 1.0 -> 0.97 (change 0.03).
        obs = [
            RequestorObservation("resolver", 2.0, 0.19),
            RequestorObservation("client", 1.0, 0.97),
        ]
        partition = classify_requestors(obs)
        assert partition.resolvers == frozenset({"resolver"})
        assert partition.full_clients == frozenset({"client"})

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        obs = [RequestorObservation(f"r{i}", 1.0, float(x)) for i, x in enumerate(rng.uniform(0.0, 0.2, 20))]
        obs += [RequestorObservation(f"c{i}", 1.0, float(x)) for i, x in enumerate(rng.uniform(0.9, 1.0, 20))]
        base = classify_requestors(obs)
        for seed in range(3):
            shuffled = list(obs)
            np.random.default_rng(seed).shuffle(shuffled)
            assert classify_requestors(shuffled) == base

    def test_needs_two_observations(self):
        with pytest.raises(ValueError):
            classify_requestors([RequestorObservation("only", 1.0, 0.5)])

    def test_zero_rate_sources_score_zero(self):
        obs = [RequestorObservation("dead", 0.0, 0.0)]
        obs += [RequestorObservation(f"r{i}", 1.0, 0.3) for i in range(3)]
        partition = classify_requestors(obs)
        assert "dead" in partition.full_clients


class TestResolverCount:
    def test_counts_resolvers(self):
        partition = RequestorPartition(
            resolvers=frozenset(f"r{i}" for i in range(7)),
            full_clients=frozenset(f"c{i}" for i in range(3)),
        )
        assert estimate_resolver_count(partition) == 7

    def test_zero_resolvers(self):
        partition = RequestorPartition(resolvers=frozenset(), full_clients=frozenset({"c"}))
        with pytest.raises(ZeroResolvers):
            estimate_resolver_count(partition)

    def test_count_from_classification_example(self):
        obs = [RequestorObservation(f"r{i}", 1.0, 0.5) for i in range(5)]
        obs += [RequestorObservation(f"c{i}", 1.0, 1.0) for i in range(5)]
        assert estimate_resolver_count(classify_requestors(obs)) == 5
