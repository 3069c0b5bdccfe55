"""Closed-form load model for TTL-cached DNS traffic.

A caching resolver that receives an aggregate client request rate ``a``
(queries per second) forwards cache misses upstream at rate
``a / (1 + a * ttl)``: every miss installs a record that stays live for
exactly ``ttl`` seconds, so consecutive misses are separated by the TTL
hold plus one exponential inter-arrival gap.  The uniform aggregate
caching (UAC) simplification assigns all ``n`` resolvers the same
equivalent inbound rate, which collapses the authoritative-side load to
``n * a / (1 + a * ttl)``.  Clients that bypass caches add a
TTL-independent floor ``d`` on top of the resolver term.

All quantities are plain floats in queries per second and seconds;
``ttl == 0`` is legal everywhere and means caching is disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

__all__ = [
    "StubOnlyParams",
    "FullModelParams",
    "MeasurementPoint",
    "aggregate_incoming_rate",
    "aggregate_full_client_rate",
    "cache_output_rate",
    "stub_only_load",
    "full_model_load",
]


def _check_rate(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be a finite non-negative rate, got {value!r}")
    return value


def _check_ttl(value: float, name: str = "ttl") -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be a finite non-negative TTL in seconds, got {value!r}")
    return value


@dataclass(frozen=True)
class StubOnlyParams:
    """UAC parameters when every requestor sits behind a caching resolver.

    ``n_resolvers`` is an integer count; ``a_tilde`` is the equivalent
    per-resolver inbound rate in qps.
    """

    n_resolvers: int
    a_tilde: float

    def __post_init__(self) -> None:
        if int(self.n_resolvers) != self.n_resolvers or self.n_resolvers < 1:
            raise ValueError(f"n_resolvers must be an integer >= 1, got {self.n_resolvers!r}")
        if not (math.isfinite(self.a_tilde) and self.a_tilde > 0.0):
            raise ValueError(f"a_tilde must be a positive rate, got {self.a_tilde!r}")


@dataclass(frozen=True)
class FullModelParams:
    """UAC parameters with a TTL-independent full-client floor.

    ``n_resolvers`` is real-valued here: the three-measurement inversion
    produces non-integer resolver-count estimates.
    """

    n_resolvers: float
    a_tilde: float
    d_full: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.n_resolvers) and self.n_resolvers > 0.0):
            raise ValueError(f"n_resolvers must be positive, got {self.n_resolvers!r}")
        if not (math.isfinite(self.a_tilde) and self.a_tilde > 0.0):
            raise ValueError(f"a_tilde must be a positive rate, got {self.a_tilde!r}")
        if not (math.isfinite(self.d_full) and self.d_full >= 0.0):
            raise ValueError(f"d_full must be a non-negative rate, got {self.d_full!r}")


@dataclass(frozen=True)
class MeasurementPoint:
    """One authoritative-side observation: (TTL in effect, aggregate rate)."""

    ttl: float
    observed_rate: float

    def __post_init__(self) -> None:
        _check_ttl(self.ttl)
        _check_rate(self.observed_rate, "observed_rate")


def aggregate_incoming_rate(client_rates: Iterable[float]) -> float:
    """Sum per-client request rates into one resolver inbound rate.

    Uses compensated summation, so a million small rates accumulate
    without drift.  An empty iterable returns 0.0.
    """
    rates = [_check_rate(r, "client rate") for r in client_rates]
    return math.fsum(rates)


def aggregate_full_client_rate(client_rates: Iterable[float]) -> float:
    """Sum per-full-client rates into the cache-bypassing total ``d``.

    Identical contract to :func:`aggregate_incoming_rate`; kept separate
    because the two totals play different roles in the load model.
    """
    return aggregate_incoming_rate(client_rates)


def cache_output_rate(a: float, tau: float) -> float:
    """Miss rate of one TTL cache fed at constant aggregate rate ``a``.

    Returns ``a / (1 + a * tau)``.  The result never exceeds ``a`` and,
    for ``tau > 0``, never reaches the saturation ceiling ``1 / tau``.
    """
    a = _check_rate(a, "a")
    tau = _check_ttl(tau, "tau")
    return a / (1.0 + a * tau)


def stub_only_load(params: StubOnlyParams, tau: float) -> float:
    """Authoritative load from ``n`` uniform resolvers and no full clients."""
    tau = _check_ttl(tau, "tau")
    return params.n_resolvers * cache_output_rate(params.a_tilde, tau)


def full_model_load(params: FullModelParams, tau: float) -> float:
    """Authoritative load with the TTL-independent full-client floor added.

    With ``d_full == 0`` this equals :func:`stub_only_load` bit for bit.
    """
    tau = _check_ttl(tau, "tau")
    return params.n_resolvers * cache_output_rate(params.a_tilde, tau) + params.d_full
