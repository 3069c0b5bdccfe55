"""Command-line interface: seeded, reproducible simulation, prediction,
validation, and sensitivity-analysis runs driven by JSON configs.

Exit codes: 0 success, 2 configuration error, 3 runtime or model error,
4 estimation infeasibility.  Every run writes a manifest echoing the
effective configuration and master seed next to its outputs; rerunning
with the same config and seed reproduces all files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, DnsLoadError, EstimationError, InvalidParams
from .estimation import (
    EstimateSource,
    invert_single_measurement,
    predict_full,
    predict_stub_only,
    solve_three_measurement,
    solve_two_measurement,
)
from .experiments import (
    GsaMethod,
    GsaScenario,
    Method,
    ScenarioConfig,
    build_population,
    run_gsa_experiment,
    run_validation,
    write_gsa_csv,
    write_manifest,
    write_rows_csv,
)
from .ioutil import atomic_write_text, stable_json_text
from .model import MeasurementPoint
from .traffic import (
    DistributionSpec,
    SimConfig,
    SimMode,
    simulate_authoritative_load,
    write_population_csv,
    write_sim_result_csv,
)

log = logging.getLogger("dnsload")

CONFIG_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ESTIMATION = 4


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    if data.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got {data.get('version')!r}")
    return data


def _section(config: dict, name: str) -> dict:
    section = config.get(name)
    if not isinstance(section, dict):
        raise ConfigError(f"config is missing the '{name}' object")
    return section


def _require(section: dict, key: str):
    if key not in section:
        raise ConfigError(f"config key missing: {key}")
    return section[key]


def _distribution(section: dict) -> DistributionSpec:
    spec = _require(section, "distribution")
    if not isinstance(spec, dict):
        raise ConfigError("'distribution' must be an object with a 'kind'")
    return DistributionSpec.from_dict(spec)


def _sim_config(section: dict, seed_override: int | None) -> SimConfig:
    seed = seed_override if seed_override is not None else _require(section, "seed")
    mode_name = section.get("mode", SimMode.RENEWAL_FAST.value)
    try:
        mode = SimMode(mode_name)
    except ValueError as exc:
        raise ConfigError(f"unknown simulation mode {mode_name!r}") from exc
    try:
        return SimConfig(duration=float(_require(section, "duration")), seed=int(seed), mode=mode)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad simulation settings: {exc}") from exc


def _scenario(section: dict, seed_override: int | None, analytic_truth: bool) -> ScenarioConfig:
    try:
        method = Method(_require(section, "method"))
    except ValueError as exc:
        raise ConfigError(f"unknown validation method {section.get('method')!r}") from exc
    grid = section.get("estimation_grid")
    try:
        return ScenarioConfig(
            distribution=_distribution(section),
            n_resolvers=int(_require(section, "n_resolvers")),
            n_full_clients=int(section.get("n_full_clients", 0)),
            measurement_ttls=tuple(_require(section, "measurement_ttls")),
            estimation_ttl=float(_require(section, "estimation_ttl")),
            sim=_sim_config(section, seed_override),
            method=method,
            estimation_grid=tuple(grid) if grid else None,
            analytic_truth=analytic_truth,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario settings: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    section = _section(config, "simulate")
    sim = _sim_config(section, args.seed)
    ttl = float(_require(section, "ttl"))
    spec = _distribution(section)
    n_resolvers = int(_require(section, "n_resolvers"))
    n_full = int(section.get("n_full_clients", 0))

    from .traffic import generate_population

    population = generate_population(spec, n_resolvers, n_full, sim.seed)
    log.info("simulating %d resolvers / %d full clients at ttl=%gs for %gs",
             n_resolvers, n_full, ttl, sim.duration)
    result = simulate_authoritative_load(population, ttl, sim)

    out = _out_dir(args)
    pop_path = out / "population.csv"
    result_path = out / "sim_result.csv"
    manifest_path = out / "manifest.json"
    write_population_csv(population, pop_path)
    write_sim_result_csv(result, result_path)
    write_manifest(
        manifest_path,
        command="simulate",
        config={**section, "seed": sim.seed, "aggregate_rate_qps": result.aggregate_rate},
        seed=sim.seed,
        outputs=[pop_path.name, result_path.name],
    )
    print(f"aggregate rate at ttl={ttl:g}s: {result.aggregate_rate:.6g} qps")
    print(f"wrote {pop_path}, {result_path}, {manifest_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    config = _load_config(args.config)
    section = _section(config, "predict")
    raw = _require(section, "measurements")
    if not isinstance(raw, list) or not 1 <= len(raw) <= 3:
        raise ConfigError("'measurements' must list 1 to 3 [ttl, rate] pairs")
    try:
        points = [MeasurementPoint(float(t), float(r)) for t, r in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad measurement points: {exc}") from exc
    tau_star = float(_require(section, "tau_predict"))

    if len(points) == 1:
        estimate = invert_single_measurement(points[0], float(_require(section, "n_resolvers")))
    elif len(points) == 2:
        estimate = solve_two_measurement(points[0], points[1], float(_require(section, "n_resolvers")))
    else:
        estimate = solve_three_measurement(*points)

    if estimate.source is EstimateSource.SINGLE_MEASUREMENT:
        predicted = predict_stub_only(estimate, tau_star)
    else:
        predicted = predict_full(estimate, tau_star)

    print(f"n_tilde={estimate.n_tilde:.10g} a_tilde={estimate.a_tilde:.10g} "
          f"d_tilde={estimate.d_tilde:.10g}")
    print(f"predicted load at ttl={tau_star:g}s: {predicted:.10g} qps")

    out = _out_dir(args)
    result_path = out / "prediction.json"
    payload = {
        "estimate": {
            "n_tilde": estimate.n_tilde,
            "a_tilde": estimate.a_tilde,
            "d_tilde": estimate.d_tilde,
            "source": estimate.source.value,
        },
        "tau_predict": tau_star,
        "predicted_load_qps": predicted,
        "measurements": [[p.ttl, p.observed_rate] for p in points],
    }
    atomic_write_text(result_path, stable_json_text(payload))
    write_manifest(out / "manifest.json", command="predict", config=section,
                   seed=0, outputs=[result_path.name])
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load_config(args.config)
    section = _section(config, "scenario")
    scenario = _scenario(section, args.seed, args.analytic_truth)
    log.info("running %s validation over %d measurement TTL(s)",
             scenario.method.value, len(scenario.measurement_ttls))
    rows = run_validation(scenario, threads=args.threads)

    out = _out_dir(args)
    csv_path = out / "validation.csv"
    write_rows_csv(rows, csv_path)
    write_manifest(
        out / "manifest.json",
        command="validate",
        config={**section, "seed": scenario.sim.seed, "analytic_truth": scenario.analytic_truth,
                "threads": args.threads},
        seed=scenario.sim.seed,
        outputs=[csv_path.name],
    )
    flagged = sum(1 for row in rows if getattr(row, "status", "ok") != "ok")
    print(f"wrote {len(rows)} grid row(s) to {csv_path} ({flagged} flagged)")
    return EXIT_OK


def cmd_gsa(args) -> int:
    config = _load_config(args.config)
    section = _section(config, "gsa")
    try:
        method = GsaMethod(_require(section, "method"))
    except ValueError as exc:
        raise ConfigError(f"unknown gsa method {section.get('method')!r}") from exc
    seed = args.seed if args.seed is not None else int(section.get("seed", 0))
    try:
        scenario = GsaScenario(
            distribution=_distribution(section),
            n_resolvers=int(section.get("n_resolvers", 100_000)),
            tau_measure=float(section.get("tau_measure", 1000.0)),
            tau_predict=float(section.get("tau_predict", 1800.0)),
            uncertainty=float(section.get("uncertainty", 0.10)),
            n_base=int(section["n_base"]) if "n_base" in section else None,
            n_boot=int(section.get("n_boot", 1000)),
            seed=seed,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad gsa settings: {exc}") from exc

    log.info("running %s sensitivity analysis", method.value)
    result = run_gsa_experiment(method, scenario)

    out = _out_dir(args)
    csv_path = out / "gsa.csv"
    write_gsa_csv(result, csv_path)
    write_manifest(
        out / "manifest.json",
        command="gsa",
        config={**section, "seed": seed, "method": method.value},
        seed=seed,
        outputs=[csv_path.name],
    )
    print(f"wrote {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnsload",
        description="DNS authoritative load modeling, prediction, and sensitivity analysis",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, handler, needs_threads in (
        ("simulate", cmd_simulate, False),
        ("predict", cmd_predict, False),
        ("validate", cmd_validate, True),
        ("gsa", cmd_gsa, False),
    ):
        p = sub.add_parser(name)
        p.set_defaults(handler=handler)
        p.add_argument("--config", required=True, help="path to a JSON config document")
        p.add_argument("--out", required=True, help="output directory (created if absent)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed (recorded in the manifest)")
        p.add_argument("--verbose", "-v", action="count", default=0)
        if needs_threads:
            p.add_argument("--threads", type=int, default=1,
                           help="cap on concurrent grid-point simulations")
            p.add_argument("--analytic-truth", action="store_true",
                           help="compare predictions against the closed-form expected load "
                                "instead of an independent simulation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")

    try:
        return args.handler(args)
    except (ConfigError, InvalidParams) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EstimationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except DnsLoadError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # no other exit codes: everything else is a runtime error
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
