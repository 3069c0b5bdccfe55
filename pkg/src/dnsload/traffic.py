"""Requestor populations and Poisson traffic simulation through TTL caches.

Populations are vectors of per-source mean query rates drawn from one of
five heterogeneous rate laws (all parameterized to a 1 qps mean by
default) plus a constant law for homogeneous scenarios.  The simulator
pushes independent Poisson query streams through per-resolver TTL caches
and counts the misses that reach the authoritative server; full clients
bypass caching entirely.

Two simulation modes produce the same miss-count distribution:

* ``EVENT_DRIVEN`` generates every arrival and applies the cache rule
  (an arrival misses iff no record is live; a miss installs a record for
  exactly ``ttl`` seconds),
* ``RENEWAL_FAST`` draws the miss process directly, using the fact that
  consecutive misses are separated by ``ttl`` plus one exponential gap.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from .errors import InvalidParams
from .seeds import derive_seed, source_generator

__all__ = [
    "DistributionKind",
    "DistributionSpec",
    "SimMode",
    "SimConfig",
    "RatePopulation",
    "SimResult",
    "zipf_rates",
    "sample_population",
    "generate_population",
    "simulate_resolver",
    "simulate_authoritative_load",
    "measure_per_source_rates",
    "analytic_authoritative_load",
    "default_specs",
    "resolver_id",
    "full_client_id",
    "population_csv_text",
    "write_population_csv",
    "read_population_csv",
    "sim_result_csv_text",
    "write_sim_result_csv",
]

_RESOLVER_STREAM = 0
_FULL_CLIENT_STREAM = 1
_POP_RESOLVER_TAG = 101
_POP_FULL_CLIENT_TAG = 102

_MAX_CHUNK = 1 << 20
_MIN_CHUNK = 64


class DistributionKind(Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"
    LOGNORMAL = "lognormal"
    WEIBULL = "weibull"
    ZIPF = "zipf"
    CONSTANT = "constant"


@dataclass(frozen=True)
class DistributionSpec:
    """A rate law plus its parameters.

    Parameter layout by kind: exponential (mean), uniform (lower, upper),
    lognormal (mu, sigma), weibull (scale, shape), zipf (alpha),
    constant (value).  The zero-argument constructors carry the standard
    mean-1 qps parameterizations.
    """

    kind: DistributionKind
    params: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        self._validate()

    def _validate(self) -> None:
        kind, p = self.kind, self.params
        arity = {
            DistributionKind.EXPONENTIAL: 1,
            DistributionKind.UNIFORM: 2,
            DistributionKind.LOGNORMAL: 2,
            DistributionKind.WEIBULL: 2,
            DistributionKind.ZIPF: 1,
            DistributionKind.CONSTANT: 1,
        }[kind]
        if len(p) != arity:
            raise InvalidParams(f"{kind.value} takes {arity} parameter(s), got {len(p)}")
        if any(not math.isfinite(v) for v in p):
            raise InvalidParams(f"{kind.value} parameters must be finite, got {p}")
        if kind is DistributionKind.EXPONENTIAL and p[0] <= 0:
            raise InvalidParams("exponential mean must be positive")
        elif kind is DistributionKind.UNIFORM:
            lower, upper = p
            if lower < 0 or lower >= upper:
                raise InvalidParams("uniform requires 0 <= lower < upper")
        elif kind is DistributionKind.LOGNORMAL and p[1] <= 0:
            raise InvalidParams("lognormal sigma must be positive")
        elif kind is DistributionKind.WEIBULL and (p[0] <= 0 or p[1] <= 0):
            raise InvalidParams("weibull scale and shape must be positive")
        elif kind is DistributionKind.ZIPF and p[0] <= 0:
            raise InvalidParams("zipf alpha must be positive")
        elif kind is DistributionKind.CONSTANT and p[0] <= 0:
            raise InvalidParams("constant rate must be positive")

    @classmethod
    def exponential(cls, mean: float = 1.0) -> "DistributionSpec":
        return cls(DistributionKind.EXPONENTIAL, (mean,))

    @classmethod
    def uniform(cls, lower: float = 0.0, upper: float = 2.0) -> "DistributionSpec":
        return cls(DistributionKind.UNIFORM, (lower, upper))

    @classmethod
    def lognormal(cls, mu: float = -0.5493, sigma: float = 1.0481) -> "DistributionSpec":
        return cls(DistributionKind.LOGNORMAL, (mu, sigma))

    @classmethod
    def weibull(cls, scale: float = 1.09, shape: float = 5.0) -> "DistributionSpec":
        return cls(DistributionKind.WEIBULL, (scale, shape))

    @classmethod
    def zipf(cls, alpha: float = 1.0) -> "DistributionSpec":
        return cls(DistributionKind.ZIPF, (alpha,))

    @classmethod
    def constant(cls, value: float = 1.0) -> "DistributionSpec":
        return cls(DistributionKind.CONSTANT, (value,))

    def analytic_mean(self, n: int | None = None) -> float:
        """Population mean rate implied by the parameters.

        Zipf rates are rank-normalized, so their mean is exactly 1
        regardless of ``n``.
        """
        kind, p = self.kind, self.params
        if kind is DistributionKind.EXPONENTIAL:
            return p[0]
        if kind is DistributionKind.UNIFORM:
            return 0.5 * (p[0] + p[1])
        if kind is DistributionKind.LOGNORMAL:
            return math.exp(p[0] + 0.5 * p[1] ** 2)
        if kind is DistributionKind.WEIBULL:
            return p[0] * math.gamma(1.0 + 1.0 / p[1])
        if kind is DistributionKind.ZIPF:
            return 1.0
        return p[0]

    def to_dict(self) -> dict:
        names = {
            DistributionKind.EXPONENTIAL: ("mean",),
            DistributionKind.UNIFORM: ("lower", "upper"),
            DistributionKind.LOGNORMAL: ("mu", "sigma"),
            DistributionKind.WEIBULL: ("scale", "shape"),
            DistributionKind.ZIPF: ("alpha",),
            DistributionKind.CONSTANT: ("value",),
        }[self.kind]
        out: dict = {"kind": self.kind.value}
        out.update(zip(names, self.params))
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        data = dict(data)
        try:
            kind = DistributionKind(data.pop("kind"))
        except (KeyError, ValueError) as exc:
            raise InvalidParams(f"unknown distribution kind in {data!r}") from exc
        builders = {
            DistributionKind.EXPONENTIAL: cls.exponential,
            DistributionKind.UNIFORM: cls.uniform,
            DistributionKind.LOGNORMAL: cls.lognormal,
            DistributionKind.WEIBULL: cls.weibull,
            DistributionKind.ZIPF: cls.zipf,
            DistributionKind.CONSTANT: cls.constant,
        }
        try:
            return builders[kind](**data)
        except TypeError as exc:
            raise InvalidParams(f"bad parameters for {kind.value}: {data!r}") from exc


def default_specs() -> list[DistributionSpec]:
    """The five standard mean-1 qps heterogeneous rate laws."""
    return [
        DistributionSpec.exponential(),
        DistributionSpec.uniform(),
        DistributionSpec.lognormal(),
        DistributionSpec.weibull(),
        DistributionSpec.zipf(),
    ]


class SimMode(Enum):
    EVENT_DRIVEN = "event"
    RENEWAL_FAST = "renewal"


@dataclass(frozen=True)
class SimConfig:
    duration: float
    seed: int
    mode: SimMode = SimMode.RENEWAL_FAST

    def __post_init__(self) -> None:
        if not (math.isfinite(self.duration) and self.duration > 0.0):
            raise ValueError(f"duration must be positive, got {self.duration!r}")
        if not 0 <= int(self.seed) < (1 << 64):
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True, eq=False)
class RatePopulation:
    """Per-source mean rates plus the law and seed that generated them."""

    resolver_rates: np.ndarray
    full_client_rates: np.ndarray
    spec: DistributionSpec | None
    seed: int

    @property
    def n_resolvers(self) -> int:
        return int(self.resolver_rates.size)

    @property
    def n_full_clients(self) -> int:
        return int(self.full_client_rates.size)

    @property
    def total_full_client_rate(self) -> float:
        return float(self.full_client_rates.sum())


@dataclass(frozen=True, eq=False)
class SimResult:
    """Miss/query counts per source plus the aggregate authoritative rate."""

    per_source_counts: dict
    aggregate_rate: float
    ttl: float
    duration: float


def resolver_id(index: int) -> str:
    return f"resolver_{index}"


def full_client_id(index: int) -> str:
    return f"full_client_{index}"


def zipf_rates(n: int, alpha: float) -> np.ndarray:
    """Rank-based Zipf rates normalized to a population mean of exactly 1 qps.

    The rank-``i`` source gets rate ``C * i**-alpha`` with
    ``C = n / sum(i**-alpha)``.
    """
    if n < 1:
        raise InvalidParams(f"population size must be >= 1, got {n}")
    if alpha <= 0:
        raise InvalidParams(f"zipf alpha must be positive, got {alpha}")
    weights = np.arange(1, n + 1, dtype=float) ** (-float(alpha))
    return weights * (n / weights.sum())


def sample_population(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` per-source mean rates; reproducible from the seed.

    Zipf populations are assigned deterministically by rank (the seed is
    ignored), all other kinds are independent draws.
    """
    if n < 1:
        raise InvalidParams(f"population size must be >= 1, got {n}")
    kind, p = spec.kind, spec.params
    if kind is DistributionKind.ZIPF:
        return zipf_rates(n, p[0])
    if kind is DistributionKind.CONSTANT:
        return np.full(n, p[0], dtype=float)
    rng = np.random.default_rng(int(seed))
    if kind is DistributionKind.EXPONENTIAL:
        return rng.exponential(p[0], n)
    if kind is DistributionKind.UNIFORM:
        return rng.uniform(p[0], p[1], n)
    if kind is DistributionKind.LOGNORMAL:
        return rng.lognormal(p[0], p[1], n)
    return p[0] * rng.weibull(p[1], n)


def generate_population(
    spec: DistributionSpec, n_resolvers: int, n_full_clients: int, seed: int
) -> RatePopulation:
    """Generate resolver and full-client rate vectors from one master seed.

    Both vectors follow the same rate law; each uses its own derived
    sub-seed so the two draws are independent but jointly reproducible.
    """
    if n_resolvers < 1:
        raise InvalidParams("populations need at least one resolver")
    if n_full_clients < 0:
        raise InvalidParams("full-client count must be non-negative")
    resolver_rates = sample_population(spec, n_resolvers, derive_seed(seed, _POP_RESOLVER_TAG))
    if n_full_clients > 0:
        full_rates = sample_population(spec, n_full_clients, derive_seed(seed, _POP_FULL_CLIENT_TAG))
    else:
        full_rates = np.empty(0, dtype=float)
    return RatePopulation(
        resolver_rates=resolver_rates,
        full_client_rates=full_rates,
        spec=spec,
        seed=int(seed),
    )


def _chunk(remaining: float) -> int:
    return int(min(max(remaining * 1.2 + 32.0, _MIN_CHUNK), _MAX_CHUNK))


def _renewal_misses(rng: np.random.Generator, rate: float, ttl: float, duration: float) -> int:
    # With Poisson arrivals, misses form a renewal process whose gaps are
    # ttl + Exp(rate); the first miss (cold cache) has no ttl hold.
    if ttl == 0.0:
        return int(rng.poisson(rate * duration))
    expected = duration / (ttl + 1.0 / rate)
    count = 0
    t = 0.0
    first_gap_offset = -ttl
    while True:
        n = _chunk(expected - count)
        gaps = rng.exponential(1.0 / rate, n) + ttl
        gaps[0] += first_gap_offset
        first_gap_offset = 0.0
        times = t + np.cumsum(gaps)
        if times[-1] >= duration:
            return count + int(np.searchsorted(times, duration, side="left"))
        count += n
        t = float(times[-1])


def _event_driven_misses(rng: np.random.Generator, rate: float, ttl: float, duration: float) -> int:
    count = 0
    t = 0.0
    expiry = 0.0
    expected_arrivals = rate * duration
    produced = 0
    while True:
        n = _chunk(expected_arrivals - produced)
        times = t + np.cumsum(rng.exponential(1.0 / rate, n))
        produced += n
        final = float(times[-1])
        done = final >= duration
        if done:
            times = times[: np.searchsorted(times, duration, side="left")]
        # Walk the misses: an arrival at s misses iff s >= expiry, i.e. the
        # record installed at the previous miss has already aged out.
        i = int(np.searchsorted(times, expiry, side="left"))
        while i < times.size:
            count += 1
            expiry = float(times[i]) + ttl
            i = int(np.searchsorted(times, expiry, side="left"))
        if done:
            return count
        t = final


def _miss_count(
    rng: np.random.Generator, rate: float, ttl: float, duration: float, mode: SimMode
) -> int:
    if rate < 0.0:
        raise ValueError(f"rate must be non-negative, got {rate}")
    if rate == 0.0:
        return 0
    if mode is SimMode.EVENT_DRIVEN:
        return _event_driven_misses(rng, rate, ttl, duration)
    return _renewal_misses(rng, rate, ttl, duration)


def simulate_resolver(rate: float, ttl: float, config: SimConfig) -> int:
    """Miss count of one resolver over [0, duration).

    Equals the ``resolver_0`` entry of :func:`simulate_authoritative_load`
    run with the same config, because the per-source stream is keyed by
    (seed, kind, index).
    """
    if ttl < 0.0:
        raise ValueError(f"ttl must be non-negative, got {ttl}")
    rng = source_generator(config.seed, _RESOLVER_STREAM, 0)
    return _miss_count(rng, float(rate), float(ttl), config.duration, config.mode)


def simulate_authoritative_load(
    population: RatePopulation, ttl: float, config: SimConfig
) -> SimResult:
    """Simulate every source independently and aggregate at the server.

    Each resolver gets its own counter-based stream keyed by
    (config.seed, source index), so results are bit-identical regardless
    of evaluation order.  Full clients bypass caching: their counts are
    plain Poisson draws from a dedicated stream, independent of the TTL.
    """
    if ttl < 0.0:
        raise ValueError(f"ttl must be non-negative, got {ttl}")
    if population.n_resolvers + population.n_full_clients == 0:
        raise ValueError("population is empty")
    duration = config.duration
    counts: dict = {}
    for i, rate in enumerate(population.resolver_rates):
        rng = source_generator(config.seed, _RESOLVER_STREAM, i)
        counts[resolver_id(i)] = _miss_count(rng, float(rate), float(ttl), duration, config.mode)
    if population.n_full_clients > 0:
        rng = source_generator(config.seed, _FULL_CLIENT_STREAM, 0)
        full_counts = rng.poisson(population.full_client_rates * duration)
        for i, c in enumerate(full_counts):
            counts[full_client_id(i)] = int(c)
    total = sum(counts.values())
    return SimResult(
        per_source_counts=counts,
        aggregate_rate=total / duration,
        ttl=float(ttl),
        duration=duration,
    )


def measure_per_source_rates(result: SimResult) -> dict:
    """Per-source observed rate in qps, keyed by source id."""
    return {sid: count / result.duration for sid, count in result.per_source_counts.items()}


def analytic_authoritative_load(population: RatePopulation, ttl: float) -> float:
    """Expected aggregate load: per-resolver miss rates plus full-client rates."""
    if ttl < 0.0:
        raise ValueError(f"ttl must be non-negative, got {ttl}")
    a = population.resolver_rates
    resolver_part = float(np.sum(a / (1.0 + a * ttl)))
    return resolver_part + population.total_full_client_rate


def _population_rows(population: RatePopulation) -> Iterator[tuple]:
    for i, rate in enumerate(population.resolver_rates):
        yield resolver_id(i), "resolver", repr(float(rate))
    for i, rate in enumerate(population.full_client_rates):
        yield full_client_id(i), "full_client", repr(float(rate))


def population_csv_text(population: RatePopulation) -> str:
    """CSV with columns source_id, kind, rate_qps."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source_id", "kind", "rate_qps"])
    writer.writerows(_population_rows(population))
    return buf.getvalue()


def write_population_csv(population: RatePopulation, path) -> None:
    from .ioutil import atomic_write_text

    atomic_write_text(path, population_csv_text(population))


def read_population_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read rates back from a population CSV; returns (resolver, full-client)."""
    resolvers: list[float] = []
    full_clients: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["kind"] == "resolver":
                resolvers.append(float(row["rate_qps"]))
            elif row["kind"] == "full_client":
                full_clients.append(float(row["rate_qps"]))
            else:
                raise ValueError(f"unknown source kind {row['kind']!r}")
    return np.asarray(resolvers, dtype=float), np.asarray(full_clients, dtype=float)


def sim_result_csv_text(result: SimResult) -> str:
    """CSV with columns source_id, kind, count."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source_id", "kind", "count"])
    for sid, count in result.per_source_counts.items():
        kind = "resolver" if sid.startswith("resolver_") else "full_client"
        writer.writerow([sid, kind, count])
    return buf.getvalue()


def write_sim_result_csv(result: SimResult, path) -> None:
    from .ioutil import atomic_write_text

    atomic_write_text(path, sim_result_csv_text(result))
