"""End-to-end validation and sensitivity-analysis scenarios.

Each runner simulates ground-truth traffic for a configured requestor
population, drives the matching estimation pipeline, and reports
prediction errors on a grid of TTL combinations.  All outputs are pure
functions of the configuration (seeds included): rerunning a scenario
reproduces its CSV and manifest byte for byte.

Grid semantics by method:

* stub-only: every measurement TTL is inverted on its own and evaluated
  against every estimation TTL in the estimation grid,
* two-measurement: every ascending pair drawn from the measurement TTLs
  forms one grid point (classification of requestors included),
* three-measurement: the first measurement TTL is held fixed and every
  ascending pair from the remaining TTLs completes the triple.

Ground truth at the estimation TTL comes from an independent simulation
of the same population under a derived seed; ``analytic_truth`` switches
to the closed-form expected load to isolate pure model error from
simulation noise.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from enum import Enum
from itertools import combinations

from . import gsa
from .errors import EstimationError
from .estimation import (
    RequestorObservation,
    classify_requestors,
    estimate_resolver_count,
    invert_single_measurement,
    predict_full,
    predict_stub_only,
    solve_three_measurement,
    solve_two_measurement,
)
from .ioutil import atomic_write_text, stable_json_text
from .model import MeasurementPoint
from .seeds import derive_seed
from .traffic import (
    DistributionSpec,
    RatePopulation,
    SimConfig,
    SimResult,
    analytic_authoritative_load,
    generate_population,
    measure_per_source_rates,
    simulate_authoritative_load,
)

__all__ = [
    "Method",
    "GsaMethod",
    "ScenarioConfig",
    "GsaScenario",
    "ErrorReport",
    "StubValidationRow",
    "TwoMeasurementRow",
    "ThreeMeasurementRow",
    "run_stub_validation",
    "run_two_measurement_validation",
    "run_three_measurement_validation",
    "run_validation",
    "run_gsa_experiment",
    "rows_to_csv_text",
    "write_rows_csv",
    "gsa_csv_text",
    "write_gsa_csv",
    "write_manifest",
    "build_population",
]

# Seed tag separating ground-truth simulations from measurement simulations.
_TRUTH_TAG = 7001

# Default sample sizes per analysis method.
GSA_DEFAULT_SAMPLES = {"eet": 6000, "fast": 3185, "vbsa": 6000}


class Method(Enum):
    STUB_ONLY = "stub_only"
    TWO_MEASUREMENT = "two_measurement"
    THREE_MEASUREMENT = "three_measurement"


class GsaMethod(Enum):
    EET = "eet"
    FAST = "fast"
    VBSA = "vbsa"


_MIN_TTLS = {Method.STUB_ONLY: 1, Method.TWO_MEASUREMENT: 2, Method.THREE_MEASUREMENT: 3}


@dataclass(frozen=True)
class ScenarioConfig:
    """One validation scenario: population, TTL grids, and sim settings."""

    distribution: DistributionSpec
    n_resolvers: int
    n_full_clients: int
    measurement_ttls: tuple
    estimation_ttl: float
    sim: SimConfig
    method: Method
    estimation_grid: tuple | None = None
    analytic_truth: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "measurement_ttls", tuple(float(t) for t in self.measurement_ttls))
        if self.estimation_grid is not None:
            object.__setattr__(self, "estimation_grid", tuple(float(t) for t in self.estimation_grid))
        if len(self.measurement_ttls) < _MIN_TTLS[self.method]:
            raise ValueError(
                f"{self.method.value} needs at least {_MIN_TTLS[self.method]} measurement TTL(s)"
            )
        if any(t < 0 for t in self.measurement_ttls):
            raise ValueError("measurement TTLs must be non-negative")
        if self.estimation_ttl < 0:
            raise ValueError("estimation TTL must be non-negative")
        if self.method is Method.STUB_ONLY and self.n_full_clients != 0:
            raise ValueError("the stub-only pipeline models populations without full clients")

    @property
    def estimation_ttls(self) -> tuple:
        return self.estimation_grid if self.estimation_grid else (self.estimation_ttl,)


@dataclass(frozen=True)
class ErrorReport:
    predicted: float
    true_load: float
    relative_error: float
    absolute_error: float

    @classmethod
    def compare(cls, predicted: float, true_load: float) -> "ErrorReport":
        absolute = abs(predicted - true_load)
        relative = absolute / true_load if true_load > 0 else math.nan
        return cls(predicted, true_load, relative, absolute)


@dataclass(frozen=True)
class StubValidationRow:
    tau_measure: float
    tau_estimate: float
    measured_rate: float
    a_tilde: float
    predicted: float
    true_load: float
    relative_error: float
    absolute_error: float


@dataclass(frozen=True)
class TwoMeasurementRow:
    tau1: float
    tau2: float
    status: str
    n_estimated: float | None
    n_true: int
    classification_accuracy: float | None
    a_tilde: float | None
    d_tilde: float | None
    d_true: float
    predicted: float | None
    true_load: float
    relative_error: float | None
    absolute_error: float | None


@dataclass(frozen=True)
class ThreeMeasurementRow:
    tau1: float
    tau2: float
    tau3: float
    status: str
    n_tilde: float | None
    n_true: int
    a_tilde: float | None
    d_tilde: float | None
    d_true: float
    predicted: float | None
    true_load: float
    relative_error: float | None
    absolute_error: float | None


def build_population(config: ScenarioConfig) -> RatePopulation:
    return generate_population(
        config.distribution, config.n_resolvers, config.n_full_clients, config.sim.seed
    )


def _truth_config(config: ScenarioConfig) -> SimConfig:
    return SimConfig(
        duration=config.sim.duration,
        seed=derive_seed(config.sim.seed, _TRUTH_TAG),
        mode=config.sim.mode,
    )


def _simulate_many(population, ttls, sim_config, threads: int) -> dict:
    """Simulate the population at each unique TTL, optionally in parallel.

    Results are keyed by TTL; per-source seeding makes the outcome
    independent of scheduling.
    """
    unique = sorted(set(float(t) for t in ttls))
    if threads > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda t: simulate_authoritative_load(population, t, sim_config), unique
            ))
        return dict(zip(unique, results))
    return {t: simulate_authoritative_load(population, t, sim_config) for t in unique}


def _true_loads(population, config: ScenarioConfig, ttls, threads: int) -> dict:
    if config.analytic_truth:
        return {t: analytic_authoritative_load(population, t) for t in set(ttls)}
    sims = _simulate_many(population, ttls, _truth_config(config), threads)
    return {t: sims[t].aggregate_rate for t in sims}


def run_stub_validation(config: ScenarioConfig, threads: int = 1) -> list[StubValidationRow]:
    """Measure once per TTL, invert, and evaluate the prediction grid.

    The resolver count passed to the inversion is the true population
    size: with no full clients every requestor the server sees is a
    caching resolver.
    """
    if config.method is not Method.STUB_ONLY:
        raise ValueError("run_stub_validation requires the stub_only method")
    population = build_population(config)
    n = population.n_resolvers
    measured = _simulate_many(population, config.measurement_ttls, config.sim, threads)
    truths = _true_loads(population, config, config.estimation_ttls, threads)

    rows = []
    for tau_m in config.measurement_ttls:
        rate = measured[tau_m].aggregate_rate
        estimate = invert_single_measurement(MeasurementPoint(tau_m, rate), n)
        for tau_e in config.estimation_ttls:
            predicted = predict_stub_only(estimate, tau_e)
            report = ErrorReport.compare(predicted, truths[tau_e])
            rows.append(StubValidationRow(
                tau_measure=tau_m,
                tau_estimate=tau_e,
                measured_rate=rate,
                a_tilde=estimate.a_tilde,
                predicted=report.predicted,
                true_load=report.true_load,
                relative_error=report.relative_error,
                absolute_error=report.absolute_error,
            ))
    return rows


def _observations(sim1: SimResult, sim2: SimResult) -> list[RequestorObservation]:
    """Pair per-source rates across two simulations, dropping sources the
    server never saw at either TTL."""
    rates1 = measure_per_source_rates(sim1)
    rates2 = measure_per_source_rates(sim2)
    obs = []
    for sid in rates1:
        r1, r2 = rates1[sid], rates2[sid]
        if r1 > 0.0 or r2 > 0.0:
            obs.append(RequestorObservation(sid, r1, r2))
    return obs


def _classification_accuracy(partition, observations) -> float:
    correct = 0
    for obs in observations:
        is_resolver = obs.source_id.startswith("resolver_")
        in_resolvers = obs.source_id in partition.resolvers
        correct += int(is_resolver == in_resolvers)
    return correct / len(observations)


def run_two_measurement_validation(
    config: ScenarioConfig, threads: int = 1
) -> list[TwoMeasurementRow]:
    """Full pipeline per TTL pair: classify requestors, estimate the
    resolver count, solve the two-equation system, and predict.

    Estimation failures (unseparable clusters, no feasible root,
    degenerate TTLs) flag the row instead of aborting the grid.
    """
    if config.method is not Method.TWO_MEASUREMENT:
        raise ValueError("run_two_measurement_validation requires the two_measurement method")
    population = build_population(config)
    pairs = [tuple(sorted(p)) for p in combinations(config.measurement_ttls, 2)]
    measured = _simulate_many(population, config.measurement_ttls, config.sim, threads)
    truths = _true_loads(population, config, (config.estimation_ttl,), threads)
    true_load = truths[config.estimation_ttl]
    d_true = population.total_full_client_rate

    rows = []
    for tau1, tau2 in pairs:
        try:
            if tau1 == tau2:
                solve_two_measurement(
                    MeasurementPoint(tau1, measured[tau1].aggregate_rate),
                    MeasurementPoint(tau2, measured[tau2].aggregate_rate),
                    population.n_resolvers,
                )
                raise AssertionError("unreachable: equal TTLs must raise")
            observations = _observations(measured[tau1], measured[tau2])
            partition = classify_requestors(observations)
            accuracy = _classification_accuracy(partition, observations)
            n_hat = estimate_resolver_count(partition)
            estimate = solve_two_measurement(
                MeasurementPoint(tau1, measured[tau1].aggregate_rate),
                MeasurementPoint(tau2, measured[tau2].aggregate_rate),
                n_hat,
            )
            predicted = predict_full(estimate, config.estimation_ttl)
            report = ErrorReport.compare(predicted, true_load)
            rows.append(TwoMeasurementRow(
                tau1=tau1, tau2=tau2, status="ok",
                n_estimated=float(n_hat), n_true=population.n_resolvers,
                classification_accuracy=accuracy,
                a_tilde=estimate.a_tilde, d_tilde=estimate.d_tilde, d_true=d_true,
                predicted=report.predicted, true_load=report.true_load,
                relative_error=report.relative_error, absolute_error=report.absolute_error,
            ))
        except EstimationError as exc:
            rows.append(TwoMeasurementRow(
                tau1=tau1, tau2=tau2, status=type(exc).__name__,
                n_estimated=None, n_true=population.n_resolvers,
                classification_accuracy=None,
                a_tilde=None, d_tilde=None, d_true=d_true,
                predicted=None, true_load=true_load,
                relative_error=None, absolute_error=None,
            ))
    return rows


def run_three_measurement_validation(
    config: ScenarioConfig, threads: int = 1
) -> list[ThreeMeasurementRow]:
    """Three-equation pipeline with the first measurement TTL held fixed.

    No requestor classification is needed: the solve recovers the
    resolver count together with the rate and the full-client floor.
    """
    if config.method is not Method.THREE_MEASUREMENT:
        raise ValueError("run_three_measurement_validation requires the three_measurement method")
    population = build_population(config)
    tau1 = config.measurement_ttls[0]
    rest = config.measurement_ttls[1:]
    pairs = [tuple(sorted(p)) for p in combinations(rest, 2)]
    measured = _simulate_many(population, config.measurement_ttls, config.sim, threads)
    truths = _true_loads(population, config, (config.estimation_ttl,), threads)
    true_load = truths[config.estimation_ttl]
    d_true = population.total_full_client_rate

    rows = []
    for tau2, tau3 in pairs:
        try:
            estimate = solve_three_measurement(
                MeasurementPoint(tau1, measured[tau1].aggregate_rate),
                MeasurementPoint(tau2, measured[tau2].aggregate_rate),
                MeasurementPoint(tau3, measured[tau3].aggregate_rate),
            )
            predicted = predict_full(estimate, config.estimation_ttl)
            report = ErrorReport.compare(predicted, true_load)
            rows.append(ThreeMeasurementRow(
                tau1=tau1, tau2=tau2, tau3=tau3, status="ok",
                n_tilde=estimate.n_tilde, n_true=population.n_resolvers,
                a_tilde=estimate.a_tilde, d_tilde=estimate.d_tilde, d_true=d_true,
                predicted=report.predicted, true_load=report.true_load,
                relative_error=report.relative_error, absolute_error=report.absolute_error,
            ))
        except EstimationError as exc:
            rows.append(ThreeMeasurementRow(
                tau1=tau1, tau2=tau2, tau3=tau3, status=type(exc).__name__,
                n_tilde=None, n_true=population.n_resolvers,
                a_tilde=None, d_tilde=None, d_true=d_true,
                predicted=None, true_load=true_load,
                relative_error=None, absolute_error=None,
            ))
    return rows


def run_validation(config: ScenarioConfig, threads: int = 1) -> list:
    runner = {
        Method.STUB_ONLY: run_stub_validation,
        Method.TWO_MEASUREMENT: run_two_measurement_validation,
        Method.THREE_MEASUREMENT: run_three_measurement_validation,
    }[config.method]
    return runner(config, threads=threads)


@dataclass(frozen=True)
class GsaScenario:
    """Sensitivity-analysis scenario around one true population."""

    distribution: DistributionSpec
    n_resolvers: int = 100_000
    tau_measure: float = 1000.0
    tau_predict: float = 1800.0
    uncertainty: float = 0.10
    n_base: int | None = None
    n_boot: int = 1000
    seed: int = 0

    @classmethod
    def reference(cls, **overrides) -> "GsaScenario":
        """The reference scenario: 100k resolvers with rank-Zipf mean-1 rates."""
        defaults = dict(distribution=DistributionSpec.zipf())
        defaults.update(overrides)
        return cls(**defaults)


def run_gsa_experiment(method: GsaMethod, scenario: GsaScenario):
    """Run one analyzer over the prediction-uncertainty model.

    Sample sizes default to the per-method values in
    ``GSA_DEFAULT_SAMPLES``; for EET the size is the trajectory count.
    """
    population = generate_population(
        scenario.distribution, scenario.n_resolvers, 0, scenario.seed
    )
    model = gsa.prediction_uncertainty_model(
        scenario.tau_measure,
        scenario.tau_predict,
        scenario.n_resolvers,
        population,
        uncertainty=scenario.uncertainty,
    )
    n_base = scenario.n_base or GSA_DEFAULT_SAMPLES[method.value]
    if method is GsaMethod.EET:
        return gsa.eet_analyze(model, model.input_space, n_base, scenario.seed, scenario.n_boot)
    if method is GsaMethod.FAST:
        return gsa.fast_analyze(model, model.input_space, n_base)
    return gsa.vbsa_analyze(model, model.input_space, n_base, scenario.seed, scenario.n_boot)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def rows_to_csv_text(rows) -> str:
    """Serialize a list of row dataclasses (one type per list) to CSV."""
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(rows[0])]
    writer.writerow(names)
    for row in rows:
        writer.writerow([_cell(getattr(row, name)) for name in names])
    return buf.getvalue()


def write_rows_csv(rows, path) -> None:
    atomic_write_text(path, rows_to_csv_text(rows))


def gsa_csv_text(result) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["input", "method", "index_name", "estimate", "ci_low", "ci_high"])
    for input_name, method, index_name, estimate, lo, hi in gsa.gsa_result_rows(result):
        writer.writerow([input_name, method, index_name,
                         _cell(float(estimate)),
                         _cell(None if lo is None else float(lo)),
                         _cell(None if hi is None else float(hi))])
    return buf.getvalue()


def write_gsa_csv(result, path) -> None:
    atomic_write_text(path, gsa_csv_text(result))


def write_manifest(path, *, command: str, config: dict, seed: int, outputs) -> None:
    """Reproducibility manifest written alongside every output set.

    Contains no timestamps: identical runs produce identical manifests.
    """
    from . import __version__

    payload = {
        "tool": "dnsload",
        "version": __version__,
        "command": command,
        "seed": int(seed),
        "config": config,
        "outputs": sorted(str(o) for o in outputs),
    }
    atomic_write_text(path, stable_json_text(payload))
