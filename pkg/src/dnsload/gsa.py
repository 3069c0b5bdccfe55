"""Global sensitivity analysis over deterministic scalar models.

Three estimators are provided:

* elementary effects screening (Morris-style one-at-a-time design built
  on Latin hypercube base points),
* FAST, the Fourier amplitude sensitivity test on a single space-filling
  search curve with interference-free integer frequencies,
* variance-based (Sobol) indices via Saltelli-style sampling, with the
  standard first-order estimator and the Jansen total-effect estimator.

A model is any callable mapping an ``(n, d)`` array of input vectors to a
length-``n`` array of outputs, deterministic row by row.  Inputs are
independent and uniform over per-input bounds given by
:class:`InputSpace`; the samplers work in standardized ``[0, 1]``
coordinates and scale to the real bounds just before evaluation.

The module also builds the package's own prediction-uncertainty model:
how measurement errors in the resolver count and the measured server load
propagate through single-measurement inversion into the load predicted at
a different TTL.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InfeasibleBox, InsufficientTrajectories, NyquistViolation
from .traffic import RatePopulation, analytic_authoritative_load

__all__ = [
    "InputSpace",
    "ScalarModel",
    "EetResult",
    "FastResult",
    "VbsaResult",
    "lhs_sample",
    "eet_analyze",
    "fast_analyze",
    "vbsa_analyze",
    "fast_frequencies",
    "PredictionUncertaintyModel",
    "prediction_uncertainty_model",
    "gsa_result_rows",
]

ScalarModel = Callable[[np.ndarray], np.ndarray]

# Number of harmonics summed per input in the FAST estimator.
FAST_HARMONICS = 4

# Elementary-effect step, as a fraction of each input's range.
EET_STEP = 0.5

# Bootstrap confidence level for EET and VBSA intervals.
CONFIDENCE_LEVEL = 0.95


@dataclass(frozen=True, eq=False)
class InputSpace:
    """Named independent inputs, each uniform over [lower, upper]."""

    names: tuple
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if len(self.names) < 1:
            raise ValueError("input space needs at least one input")
        if self.lower.shape != (len(self.names),) or self.upper.shape != (len(self.names),):
            raise ValueError("bounds must match the number of names")
        if not np.all(self.lower < self.upper):
            raise ValueError("every lower bound must be strictly below its upper bound")

    @classmethod
    def from_bounds(cls, bounds: Sequence[tuple]) -> "InputSpace":
        """Build from (name, lower, upper) triples."""
        names = tuple(b[0] for b in bounds)
        lower = [b[1] for b in bounds]
        upper = [b[2] for b in bounds]
        return cls(names, lower, upper)

    @property
    def dim(self) -> int:
        return len(self.names)

    def scale(self, unit: np.ndarray) -> np.ndarray:
        """Map standardized [0, 1] coordinates to real input values."""
        return self.lower + np.asarray(unit, dtype=float) * (self.upper - self.lower)


@dataclass(frozen=True, eq=False)
class EetResult:
    names: tuple
    mi: np.ndarray
    mi_star: np.ndarray
    sigma: np.ndarray
    ci_mi: np.ndarray
    ci_sigma: np.ndarray
    n_trajectories: int


@dataclass(frozen=True, eq=False)
class FastResult:
    names: tuple
    first_order: np.ndarray
    frequencies: np.ndarray
    n_samples: int


@dataclass(frozen=True, eq=False)
class VbsaResult:
    names: tuple
    main_effect: np.ndarray
    total_effect: np.ndarray
    ci_main: np.ndarray
    ci_total: np.ndarray
    n_base: int


def _lhs_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube in [0, 1]^d: one point per equiprobable stratum."""
    out = np.empty((n, d))
    for j in range(d):
        out[:, j] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return out


def lhs_sample(space: InputSpace, n: int, seed: int) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in real coordinates."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(int(seed))
    return space.scale(_lhs_unit(n, space.dim, rng))


def _percentile_ci(samples: np.ndarray, estimate: np.ndarray) -> np.ndarray:
    """Percentile bootstrap interval, widened to contain the point estimate."""
    alpha = 100.0 * (1.0 - CONFIDENCE_LEVEL) / 2.0
    lo = np.percentile(samples, alpha, axis=0)
    hi = np.percentile(samples, 100.0 - alpha, axis=0)
    lo = np.minimum(lo, estimate)
    hi = np.maximum(hi, estimate)
    return np.stack([lo, hi], axis=-1)


def eet_analyze(
    model: ScalarModel,
    space: InputSpace,
    r: int,
    seed: int,
    n_boot: int = 1000,
) -> EetResult:
    """Elementary effects screening from ``r`` one-at-a-time trajectories.

    Each trajectory starts at a Latin hypercube base point and perturbs
    each input once by half its range (stepping down when stepping up
    would leave the unit cube).  Elementary effects are computed on the
    standardized space, signed, and divided by the realized step, so a
    model that is linear in one input yields identical effects for it on
    every trajectory.  ``mi`` is the mean of the signed effects, ``mi_star``
    the mean of their absolute values, ``sigma`` their standard deviation.
    Trajectory-level bootstrap resampling yields percentile confidence
    intervals for ``mi`` and ``sigma``.
    """
    if r < 2:
        raise InsufficientTrajectories(f"need at least 2 trajectories, got {r}")
    d = space.dim
    rng = np.random.default_rng(int(seed))
    base = _lhs_unit(r, d, rng)
    f_base = np.asarray(model(space.scale(base)), dtype=float)
    if f_base.shape != (r,):
        raise ValueError("model must return one output per input row")

    effects = np.empty((r, d))
    for j in range(d):
        perturbed = base.copy()
        up = base[:, j] + EET_STEP <= 1.0
        target = np.where(up, base[:, j] + EET_STEP, base[:, j] - EET_STEP)
        perturbed[:, j] = target
        step = perturbed[:, j] - base[:, j]
        effects[:, j] = (np.asarray(model(space.scale(perturbed)), dtype=float) - f_base) / step

    mi = effects.mean(axis=0)
    mi_star = np.abs(effects).mean(axis=0)
    sigma = effects.std(axis=0, ddof=1)

    boot_mi = np.empty((n_boot, d))
    boot_sigma = np.empty((n_boot, d))
    for b in range(n_boot):
        idx = rng.integers(0, r, size=r)
        sample = effects[idx]
        boot_mi[b] = sample.mean(axis=0)
        boot_sigma[b] = sample.std(axis=0, ddof=1)

    return EetResult(
        names=space.names,
        mi=mi,
        mi_star=mi_star,
        sigma=sigma,
        ci_mi=_percentile_ci(boot_mi, mi),
        ci_sigma=_percentile_ci(boot_sigma, sigma),
        n_trajectories=r,
    )


# Classical interference-free frequency table (free through order 4) and the
# increments used to extend it to higher dimensions.
_FAST_OMEGA = (
    0, 3, 1, 5, 11, 1, 17, 23, 19, 25, 41, 31, 23, 87, 67, 73, 85, 143, 149,
    99, 119, 237, 267, 283, 151, 385, 157, 215, 449, 163, 337, 253, 375, 441,
    673, 773, 875, 873, 587, 849, 623, 637, 891, 943, 1171, 1225, 1335, 1725,
    1663, 2019,
)
_FAST_INCREMENT = (
    4, 8, 6, 10, 20, 22, 32, 40, 38, 26, 56, 62, 46, 76, 96, 60, 86, 126, 134,
    112, 92, 128, 154, 196, 34, 416, 106, 208, 328, 198, 382, 88, 348, 186,
    140, 170, 284, 568, 302, 438, 410, 248, 448, 388, 596, 216, 100, 488, 166, 0,
)


def fast_frequencies(d: int) -> np.ndarray:
    """Integer search-curve frequencies for ``d`` inputs (classical sets)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return np.array([1], dtype=int)
    if d > len(_FAST_OMEGA):
        raise ValueError(f"no frequency set tabulated for {d} inputs")
    omega = np.empty(d, dtype=int)
    omega[0] = _FAST_OMEGA[d - 1]
    for i in range(1, d):
        omega[i] = omega[i - 1] + _FAST_INCREMENT[d - 1 - i]
    return omega


def fast_analyze(model: ScalarModel, space: InputSpace, n_base: int) -> FastResult:
    """First-order indices by Fourier decomposition along a search curve.

    Input ``i`` oscillates as ``0.5 + arcsin(sin(omega_i * s)) / pi`` while
    ``s`` sweeps ``n_base`` equispaced points across (-pi, pi).  The output
    variance concentrated at the first ``FAST_HARMONICS`` harmonics of
    ``omega_i``, divided by the total variance, estimates input ``i``'s
    first-order index.
    """
    d = space.dim
    omega = fast_frequencies(d)
    min_samples = 2 * FAST_HARMONICS * int(omega.max()) + 1
    if n_base < min_samples:
        raise NyquistViolation(
            f"n_base={n_base} is below the minimum {min_samples} required by the "
            f"frequency set {omega.tolist()} with {FAST_HARMONICS} harmonics"
        )
    s = -np.pi + 2.0 * np.pi * (np.arange(n_base) + 0.5) / n_base
    unit = 0.5 + np.arcsin(np.sin(np.outer(s, omega))) / np.pi
    y = np.asarray(model(space.scale(unit)), dtype=float)
    if y.shape != (n_base,):
        raise ValueError("model must return one output per input row")
    y = y - y.mean()
    total_variance = float(np.mean(y * y))
    if total_variance == 0.0:
        return FastResult(space.names, np.zeros(d), omega, n_base)

    first = np.empty(d)
    for i, w in enumerate(omega):
        power = 0.0
        for harmonic in range(1, FAST_HARMONICS + 1):
            j = harmonic * int(w)
            a = 2.0 * np.mean(y * np.cos(j * s))
            b = 2.0 * np.mean(y * np.sin(j * s))
            power += 0.5 * (a * a + b * b)
        first[i] = power / total_variance
    return FastResult(space.names, first, omega, n_base)


def vbsa_analyze(
    model: ScalarModel,
    space: InputSpace,
    n_base: int,
    seed: int,
    n_boot: int = 1000,
) -> VbsaResult:
    """Sobol main and total effects via Saltelli-style sampling.

    Two independent Latin hypercube matrices A and B of ``n_base`` rows
    are drawn, plus one hybrid matrix per input (A with that input's
    column taken from B), for ``n_base * (d + 2)`` model evaluations.
    Main effects use the B * (f(AB_i) - f(A)) estimator; total effects use
    Jansen's mean-squared-difference estimator.  Row-level bootstrap gives
    percentile confidence intervals.
    """
    if n_base < 10:
        raise ValueError(f"n_base must be >= 10, got {n_base}")
    d = space.dim
    rng = np.random.default_rng(int(seed))
    a_matrix = _lhs_unit(n_base, d, rng)
    b_matrix = _lhs_unit(n_base, d, rng)
    y_a = np.asarray(model(space.scale(a_matrix)), dtype=float)
    y_b = np.asarray(model(space.scale(b_matrix)), dtype=float)
    y_ab = np.empty((n_base, d))
    for i in range(d):
        hybrid = a_matrix.copy()
        hybrid[:, i] = b_matrix[:, i]
        y_ab[:, i] = np.asarray(model(space.scale(hybrid)), dtype=float)

    def indices(ya: np.ndarray, yb: np.ndarray, yab: np.ndarray) -> tuple:
        variance = np.concatenate([ya, yb]).var()
        main = np.mean(yb[:, None] * (yab - ya[:, None]), axis=0) / variance
        total = np.mean((ya[:, None] - yab) ** 2, axis=0) / (2.0 * variance)
        return main, total

    main_effect, total_effect = indices(y_a, y_b, y_ab)

    boot_main = np.empty((n_boot, d))
    boot_total = np.empty((n_boot, d))
    for b in range(n_boot):
        idx = rng.integers(0, n_base, size=n_base)
        boot_main[b], boot_total[b] = indices(y_a[idx], y_b[idx], y_ab[idx])

    return VbsaResult(
        names=space.names,
        main_effect=main_effect,
        total_effect=total_effect,
        ci_main=_percentile_ci(boot_main, main_effect),
        ci_total=_percentile_ci(boot_total, total_effect),
        n_base=n_base,
    )


class PredictionUncertaintyModel:
    """Prediction at a target TTL as a function of perturbed measurements.

    Inputs are the resolver count and the aggregate load measured at
    ``tau_measure``, each ranging over +-``uncertainty`` around its true
    value.  The output chains single-measurement inversion with forward
    prediction at ``tau_predict``.  Construction fails with
    :class:`InfeasibleBox` if any corner of the input box violates the
    ``n > load * ttl`` saturation constraint that inversion requires.
    """

    def __init__(
        self,
        input_space: InputSpace,
        true_n_resolvers: float,
        true_measured_load: float,
        tau_measure: float,
        tau_predict: float,
    ) -> None:
        self.input_space = input_space
        self.true_n_resolvers = true_n_resolvers
        self.true_measured_load = true_measured_load
        self.tau_measure = tau_measure
        self.tau_predict = tau_predict

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x[:, 0]
        load = x[:, 1]
        a = load / (n - load * self.tau_measure)
        return n * a / (1.0 + a * self.tau_predict)


def prediction_uncertainty_model(
    tau_measure: float,
    tau_predict: float,
    n_resolvers: int,
    population: RatePopulation,
    uncertainty: float = 0.10,
) -> PredictionUncertaintyModel:
    """Build the measurement-uncertainty model around a true population.

    The true measured load is the analytic aggregate of per-resolver miss
    rates (plus any full-client rates) at ``tau_measure``.
    """
    if not 0.0 < uncertainty < 1.0:
        raise ValueError(f"uncertainty must be in (0, 1), got {uncertainty}")
    n_true = float(n_resolvers)
    load_true = analytic_authoritative_load(population, tau_measure)
    n_low = (1.0 - uncertainty) * n_true
    load_high = (1.0 + uncertainty) * load_true
    margin = n_low - load_high * tau_measure
    if margin <= 0.0:
        raise InfeasibleBox(
            f"corner (n={n_low:.6g}, load={load_high:.6g}) violates n > load * ttl "
            f"at ttl={tau_measure:.6g}s (margin {margin:.6g}); the +-"
            f"{uncertainty:.0%} box crosses the saturation boundary and the "
            "inversion is undefined inside it"
        )
    space = InputSpace(
        names=("n_resolvers", "measured_load"),
        lower=np.array([n_low, (1.0 - uncertainty) * load_true]),
        upper=np.array([(1.0 + uncertainty) * n_true, load_high]),
    )
    return PredictionUncertaintyModel(space, n_true, load_true, tau_measure, tau_predict)


def gsa_result_rows(result) -> list[tuple]:
    """Flatten any analyzer result into (input, method, index_name,
    estimate, ci_low, ci_high) rows for CSV output."""
    rows: list[tuple] = []
    if isinstance(result, EetResult):
        for i, name in enumerate(result.names):
            rows.append((name, "eet", "mi", result.mi[i], result.ci_mi[i, 0], result.ci_mi[i, 1]))
            rows.append((name, "eet", "mi_star", result.mi_star[i], None, None))
            rows.append(
                (name, "eet", "sigma", result.sigma[i], result.ci_sigma[i, 0], result.ci_sigma[i, 1])
            )
    elif isinstance(result, FastResult):
        for i, name in enumerate(result.names):
            rows.append((name, "fast", "first_order", result.first_order[i], None, None))
    elif isinstance(result, VbsaResult):
        for i, name in enumerate(result.names):
            rows.append(
                (name, "vbsa", "main_effect", result.main_effect[i],
                 result.ci_main[i, 0], result.ci_main[i, 1])
            )
            rows.append(
                (name, "vbsa", "total_effect", result.total_effect[i],
                 result.ci_total[i, 0], result.ci_total[i, 1])
            )
    else:
        raise TypeError(f"unknown GSA result type: {type(result)!r}")
    return rows
