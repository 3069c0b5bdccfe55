"""Inversion of the UAC load model from authoritative-side measurements.

Three estimation routes are supported, matching how much the operator can
observe:

* one measurement with a known resolver count (stub-only model),
* two measurements plus a resolver count estimated by clustering
  per-requestor rate changes,
* three measurements, which pin down resolver count, per-resolver rate,
  and the full-client floor with no clustering at all.

The two- and three-measurement systems are solved in closed form: pairwise
differences eliminate the TTL-independent floor, and the remaining system
reduces to a quadratic (two measurements, resolver count known) or a
linear equation (three measurements) in the per-resolver rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import (
    AmbiguousSolution,
    DegenerateTtls,
    InconsistentMeasurements,
    InfeasibleMeasurement,
    NoFeasibleRoot,
    UnseparableClusters,
    ZeroDifference,
    ZeroResolvers,
)
from .model import FullModelParams, MeasurementPoint, StubOnlyParams, full_model_load, stub_only_load

__all__ = [
    "EstimateSource",
    "UacEstimate",
    "RequestorObservation",
    "RequestorPartition",
    "invert_single_measurement",
    "predict_stub_only",
    "solve_two_measurement",
    "solve_three_measurement",
    "predict_full",
    "classify_requestors",
    "estimate_resolver_count",
]

# Solved parameters must reproduce their input measurements this tightly.
SOLVE_RELATIVE_TOLERANCE = 1e-9

# A fitted full-client floor this slightly negative (relative to the total
# load) is attributed to measurement noise at the d = 0 boundary and clamped.
_D_CLAMP_FRACTION = 1e-6

# Guards max(rate1, rate2, eps) against division by zero for silent sources.
CLASSIFY_EPSILON = 1e-9

# Two cluster centroids closer than this fraction of the larger one are
# considered unseparable.
CLASSIFY_SEPARATION = 0.10


class EstimateSource(Enum):
    SINGLE_MEASUREMENT = "single_measurement"
    TWO_MEASUREMENT = "two_measurement"
    THREE_MEASUREMENT = "three_measurement"


@dataclass(frozen=True)
class UacEstimate:
    """Fitted UAC parameters: resolver count, per-resolver rate, floor."""

    n_tilde: float
    a_tilde: float
    d_tilde: float
    source: EstimateSource

    def __post_init__(self) -> None:
        if not (math.isfinite(self.n_tilde) and self.n_tilde > 0.0):
            raise ValueError(f"n_tilde must be positive, got {self.n_tilde!r}")
        if not (math.isfinite(self.a_tilde) and self.a_tilde > 0.0):
            raise ValueError(f"a_tilde must be positive, got {self.a_tilde!r}")
        if not (math.isfinite(self.d_tilde) and self.d_tilde >= 0.0):
            raise ValueError(f"d_tilde must be non-negative, got {self.d_tilde!r}")
        if self.source is EstimateSource.SINGLE_MEASUREMENT and self.d_tilde != 0.0:
            raise ValueError("single-measurement estimates carry no full-client floor")


@dataclass(frozen=True)
class RequestorObservation:
    """Per-source rates measured under two different TTL settings."""

    source_id: str
    rate_at_tau1: float
    rate_at_tau2: float

    def __post_init__(self) -> None:
        if self.rate_at_tau1 < 0.0 or self.rate_at_tau2 < 0.0:
            raise ValueError("observed rates must be non-negative")


@dataclass(frozen=True)
class RequestorPartition:
    """Disjoint split of observed sources into resolvers and full clients."""

    resolvers: frozenset
    full_clients: frozenset

    def __post_init__(self) -> None:
        if self.resolvers & self.full_clients:
            raise ValueError("partition sets must be disjoint")


def invert_single_measurement(m: MeasurementPoint, n_resolvers: float) -> UacEstimate:
    """Recover the per-resolver rate from one measurement and a known count.

    Solves ``b = n * a / (1 + a * ttl)`` for ``a``, giving
    ``a = b / (n - b * ttl)``.  Raises :class:`InfeasibleMeasurement` when
    the observed rate sits at or above the ``n / ttl`` saturation ceiling,
    where no finite per-resolver rate reproduces it.
    """
    if not (math.isfinite(n_resolvers) and n_resolvers >= 1.0):
        raise ValueError(f"n_resolvers must be >= 1, got {n_resolvers!r}")
    if m.observed_rate <= 0.0:
        raise ValueError("observed rate must be positive to invert")
    denom = n_resolvers - m.observed_rate * m.ttl
    if denom <= 0.0:
        raise InfeasibleMeasurement(
            f"observed rate {m.observed_rate} at ttl {m.ttl} meets or exceeds the "
            f"saturation ceiling {n_resolvers}/{m.ttl or 'inf'}; the measurement is "
            "inconsistent with a TTL-honoring cache population of this size"
        )
    return UacEstimate(
        n_tilde=float(n_resolvers),
        a_tilde=m.observed_rate / denom,
        d_tilde=0.0,
        source=EstimateSource.SINGLE_MEASUREMENT,
    )


def predict_stub_only(estimate: UacEstimate, tau_star: float) -> float:
    """Forward-evaluate a single-measurement estimate at a candidate TTL."""
    if estimate.source is not EstimateSource.SINGLE_MEASUREMENT:
        raise ValueError("predict_stub_only expects a single-measurement estimate")
    params = StubOnlyParams(n_resolvers=int(round(estimate.n_tilde)), a_tilde=estimate.a_tilde)
    return stub_only_load(params, tau_star)


def predict_full(estimate: UacEstimate, tau_star: float) -> float:
    """Forward-evaluate a two- or three-measurement estimate at a TTL."""
    if estimate.source is EstimateSource.SINGLE_MEASUREMENT:
        raise ValueError("predict_full expects an estimate with a fitted full-client floor")
    params = FullModelParams(estimate.n_tilde, estimate.a_tilde, estimate.d_tilde)
    return full_model_load(params, tau_star)


def _reproduces(estimate: UacEstimate, points: Iterable[MeasurementPoint]) -> bool:
    params = FullModelParams(estimate.n_tilde, estimate.a_tilde, estimate.d_tilde)
    for p in points:
        predicted = full_model_load(params, p.ttl)
        scale = max(abs(p.observed_rate), 1e-300)
        if abs(predicted - p.observed_rate) / scale > SOLVE_RELATIVE_TOLERANCE:
            return False
    return True


def _polish_two_measurement_rate(
    a: float, n: float, t1: float, t2: float, delta: float, iterations: int = 3
) -> float:
    """Newton-polish the quadratic root on the exact load-difference residual.

    Forming the quadratic coefficients can cancel catastrophically when
    ``delta * t1 * t2`` nearly equals ``n * (t2 - t1)``; a few Newton steps
    on F(a) = n*a/(1+a*t1) - n*a/(1+a*t2) - delta (strictly increasing for
    t1 < t2) restore accuracy to the level the input data supports.
    """
    for _ in range(iterations):
        residual = n * a / (1.0 + a * t1) - n * a / (1.0 + a * t2) - delta
        slope = n / (1.0 + a * t1) ** 2 - n / (1.0 + a * t2) ** 2
        if slope == 0.0:
            break
        candidate = a - residual / slope
        if not (math.isfinite(candidate) and candidate > 0.0):
            break
        a = candidate
    return a


def _polish_three_measurement_rate(
    a: float, t1: float, t2: float, t3: float, d12: float, d13: float, iterations: int = 3
) -> float:
    """Newton-polish the linear-elimination root for the three-point solve.

    Solves phi(a) = d13 - c*(1+a*t2)/(1+a*t3) = 0 with
    c = d12*(t3-t1)/(t2-t1), which the eliminated system satisfies exactly.
    """
    c = d12 * (t3 - t1) / (t2 - t1)
    for _ in range(iterations):
        ratio = (1.0 + a * t2) / (1.0 + a * t3)
        phi = d13 - c * ratio
        dphi = -c * (t2 - t3) / (1.0 + a * t3) ** 2
        if dphi == 0.0:
            break
        candidate = a - phi / dphi
        if not (math.isfinite(candidate) and candidate > 0.0):
            break
        a = candidate
    return a


def _positive_roots(a2: float, a1: float, a0: float) -> list[float]:
    """Real positive roots of a2*x^2 + a1*x + a0 = 0, numerically stable."""
    if a2 == 0.0:
        if a1 == 0.0:
            return []
        root = -a0 / a1
        return [root] if root > 0.0 else []
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    if a1 >= 0.0:
        q = -0.5 * (a1 + sq)
    else:
        q = -0.5 * (a1 - sq)
    roots = set()
    if q != 0.0:
        roots.add(q / a2)
        roots.add(a0 / q)
    else:
        roots.add(0.0)
        roots.add(-a1 / a2)
    return sorted(r for r in roots if math.isfinite(r) and r > 0.0)


def solve_two_measurement(
    m1: MeasurementPoint, m2: MeasurementPoint, n_resolvers: float
) -> UacEstimate:
    """Fit (per-resolver rate, full-client floor) from two measurements.

    Subtracting the two load equations eliminates the floor and leaves

        [delta*t1*t2 - n*(t2 - t1)] * a^2 + delta*(t1 + t2) * a + delta = 0

    with ``delta`` the load difference and ``t1 < t2``.  The positive root
    gives the rate; either original equation then gives the floor.
    """
    if not (math.isfinite(n_resolvers) and n_resolvers > 0.0):
        raise ValueError(f"n_resolvers must be positive, got {n_resolvers!r}")
    if m1.observed_rate <= 0.0 or m2.observed_rate <= 0.0:
        raise ValueError("observed rates must be positive to solve")
    if m1.ttl == m2.ttl:
        raise DegenerateTtls(f"both measurements use ttl {m1.ttl}; the system is singular")
    if m1.ttl > m2.ttl:
        m1, m2 = m2, m1
    t1, b1 = m1.ttl, m1.observed_rate
    t2, b2 = m2.ttl, m2.observed_rate
    delta = b1 - b2
    if delta == 0.0:
        raise NoFeasibleRoot(
            f"identical loads {b1} at ttls {t1} and {t2}: no positive per-resolver "
            "rate explains a TTL-insensitive load through caching"
        )

    a2 = delta * t1 * t2 - n_resolvers * (t2 - t1)
    a1 = delta * (t1 + t2)
    a0 = delta
    load_scale = max(b1, b2)

    admissible: list[UacEstimate] = []
    for root in _positive_roots(a2, a1, a0):
        d = b1 - n_resolvers * root / (1.0 + root * t1)
        if d < -_D_CLAMP_FRACTION * load_scale:
            continue
        candidate = UacEstimate(
            n_tilde=float(n_resolvers),
            a_tilde=root,
            d_tilde=max(d, 0.0),
            source=EstimateSource.TWO_MEASUREMENT,
        )
        if _reproduces(candidate, (m1, m2)):
            admissible.append(candidate)
    if not admissible:
        raise NoFeasibleRoot(
            f"no positive rate with a non-negative floor reproduces loads "
            f"({b1} @ {t1}s, {b2} @ {t2}s) with {n_resolvers} resolvers"
        )
    if len(admissible) > 1:
        raise AmbiguousSolution(
            "both quadratic roots yield admissible estimates", admissible
        )
    return admissible[0]


def solve_three_measurement(
    m1: MeasurementPoint, m2: MeasurementPoint, m3: MeasurementPoint
) -> UacEstimate:
    """Fit (resolver count, per-resolver rate, floor) from three measurements.

    Pairwise load differences eliminate the floor; their ratio also
    eliminates the resolver count and leaves one linear equation

        a * [r*(t3 - t1)*t2 - (t2 - t1)*t3] = (t2 - t1) - r*(t3 - t1)

    with ``r = delta12 / delta13``.  The count follows from ``delta12``,
    the floor from any of the three equations.
    """
    points = sorted((m1, m2, m3), key=lambda p: p.ttl)
    (t1, b1), (t2, b2), (t3, b3) = ((p.ttl, p.observed_rate) for p in points)
    if t1 == t2 or t2 == t3:
        raise DegenerateTtls("measurement TTLs must be pairwise distinct")
    if b1 <= 0.0 or b2 <= 0.0 or b3 <= 0.0:
        raise ValueError("observed rates must be positive to solve")

    d12 = b1 - b2
    d13 = b1 - b3
    if d12 == 0.0 or d13 == 0.0:
        raise ZeroDifference(
            "loads do not change across distinct TTLs: the caching term cannot be "
            "separated from the TTL-independent floor"
        )

    r = d12 / d13
    coef = r * (t3 - t1) * t2 - (t2 - t1) * t3
    rhs = (t2 - t1) - r * (t3 - t1)
    if coef == 0.0:
        raise InconsistentMeasurements(
            "measurement differences admit no finite per-resolver rate"
        )
    a = rhs / coef
    if not math.isfinite(a) or a <= 0.0:
        raise InconsistentMeasurements(f"solved per-resolver rate {a} is not positive")

    n = d12 * (1.0 + a * t1) * (1.0 + a * t2) / (a * a * (t2 - t1))
    if not math.isfinite(n) or n <= 0.0:
        raise InconsistentMeasurements(f"solved resolver count {n} is not positive")

    load_scale = max(b1, b2, b3)
    d = b1 - n * a / (1.0 + a * t1)
    if d < -_D_CLAMP_FRACTION * load_scale:
        raise InconsistentMeasurements(f"solved full-client floor {d} is negative")

    estimate = UacEstimate(
        n_tilde=n,
        a_tilde=a,
        d_tilde=max(d, 0.0),
        source=EstimateSource.THREE_MEASUREMENT,
    )
    if not _reproduces(estimate, points):
        raise InconsistentMeasurements(
            "closed-form solution fails to reproduce the measurements; the inputs "
            "are inconsistent with the load model"
        )
    return estimate


def _rate_change(obs: RequestorObservation) -> float:
    return abs(obs.rate_at_tau1 - obs.rate_at_tau2) / max(
        obs.rate_at_tau1, obs.rate_at_tau2, CLASSIFY_EPSILON
    )


def classify_requestors(observations: Sequence[RequestorObservation]) -> RequestorPartition:
    """Split requestors into caching resolvers and cache-bypassing clients.

    Each source gets a relative rate-change score between the two TTL
    settings; two-centroid k-means on the scores (initialized at their min
    and max, iterated to a fixed point) separates TTL-sensitive resolvers
    from TTL-insensitive full clients.  The cluster with the larger
    centroid is labeled resolvers.

    Raises :class:`UnseparableClusters` when the converged centroids sit
    within 10% of each other: rate changes that similar cannot support a
    reliable split, and the caller should fall back to the
    three-measurement solve.
    """
    if len(observations) < 2:
        raise ValueError("classification needs at least two observations")
    ids = [obs.source_id for obs in observations]
    if len(set(ids)) != len(ids):
        raise ValueError("observation source_ids must be unique")

    deltas = [_rate_change(obs) for obs in observations]
    lo = min(deltas)
    hi = max(deltas)
    if hi == lo:
        raise UnseparableClusters(
            "all sources show the same relative rate change; no cluster structure"
        )

    for _ in range(100):
        boundary = 0.5 * (lo + hi)
        low_vals = [d for d in deltas if d <= boundary]
        high_vals = [d for d in deltas if d > boundary]
        if not low_vals or not high_vals:
            break
        new_lo = sum(low_vals) / len(low_vals)
        new_hi = sum(high_vals) / len(high_vals)
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi

    if hi - lo < CLASSIFY_SEPARATION * max(hi, lo):
        raise UnseparableClusters(
            f"cluster centroids {lo:.6g} and {hi:.6g} differ by less than "
            f"{CLASSIFY_SEPARATION:.0%} of the larger; classification is unreliable"
        )

    boundary = 0.5 * (lo + hi)
    resolvers = frozenset(i for i, d in zip(ids, deltas) if d > boundary)
    full_clients = frozenset(i for i, d in zip(ids, deltas) if d <= boundary)
    return RequestorPartition(resolvers=resolvers, full_clients=full_clients)


def estimate_resolver_count(partition: RequestorPartition) -> int:
    """Resolver count is the cardinality of the resolver cluster."""
    if not partition.resolvers:
        raise ZeroResolvers("partition contains no resolvers")
    return len(partition.resolvers)
