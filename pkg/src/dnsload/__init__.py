"""dnsload: authoritative DNS server load modeling under TTL caching.

Predicts server load at alternative TTLs from one, two, or three
server-side measurements, validates the predictions against a traffic
simulator with heterogeneous resolver populations, and quantifies the
sensitivity of predictions to measurement uncertainty.
"""

from .errors import (
    AmbiguousSolution,
    ConfigError,
    DegenerateTtls,
    DnsLoadError,
    EstimationError,
    GsaError,
    InconsistentMeasurements,
    InfeasibleBox,
    InfeasibleMeasurement,
    InsufficientTrajectories,
    InvalidParams,
    NoFeasibleRoot,
    NyquistViolation,
    SimulationError,
    UnseparableClusters,
    ZeroDifference,
    ZeroResolvers,
)
from .estimation import (
    EstimateSource,
    RequestorObservation,
    RequestorPartition,
    UacEstimate,
    classify_requestors,
    estimate_resolver_count,
    invert_single_measurement,
    predict_full,
    predict_stub_only,
    solve_three_measurement,
    solve_two_measurement,
)
from .model import (
    FullModelParams,
    MeasurementPoint,
    StubOnlyParams,
    aggregate_full_client_rate,
    aggregate_incoming_rate,
    cache_output_rate,
    full_model_load,
    stub_only_load,
)
from .traffic import (
    DistributionKind,
    DistributionSpec,
    RatePopulation,
    SimConfig,
    SimMode,
    SimResult,
    analytic_authoritative_load,
    generate_population,
    measure_per_source_rates,
    sample_population,
    simulate_authoritative_load,
    simulate_resolver,
    zipf_rates,
)

__version__ = "0.1.0"
