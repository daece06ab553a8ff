"""Batch pipeline driver.

Subcommands map one-to-one onto the library stages:

    build-books    events NDJSON -> snapshot directory (CSV per sample + index)
    fit            snapshot directory -> observations CSV
    deseasonalize  observations CSV -> deseasonalized CSV + profile JSON
    calibrate      deseasonalized CSV -> calibration report JSON
    simulate       report JSON -> simulated paths CSV
    impulse        report JSON -> impulse response CSV
    equilibrium    report JSON -> equilibrium vector on stdout
    synth          synthetic-truth config -> full dataset on disk
    run-all        events NDJSON -> all of the above in one output directory

Options may come from a JSON config file (--config); explicit flags win.
All randomness is seeded from the configuration, and outputs are
deterministic byte-for-byte for identical inputs and seeds.
On failure a machine-readable JSON error is printed to stderr and the
exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from decimal import Decimal
from pathlib import Path

import numpy as np

from . import builder, dynamics, impact, seasonal, synth
from .calibrate import (
    SdeParams,
    StateSeries,
    calibrate,
    params_from_report,
    read_report_json,
    write_report_json,
)
from .errors import ConfigError, IoError, LobkitError
from .timegrid import TradingWindow, format_iso_ns

log = logging.getLogger("lobkit")

DEFAULTS = {
    "interval": 600.0,   # 10-minute sampling
    "depth": 10,         # best prices per side in the slope fit
    "window": "10:00-16:00",
    "seed": 0,
    "jobs": 1,
    "steps": 36,
    "paths": 1,
    "factor": "beta_minus",
    "magnitude": 1.0,
    "horizon": 36,
}


def _load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg.update(json.load(fh))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    for key, value in vars(args).items():
        if key in ("func", "config") or value is None:
            continue
        cfg[key] = value
    if cfg.get("interval", 1) <= 0:
        raise ConfigError("interval must be positive")
    if cfg.get("depth", 1) < 1:
        raise ConfigError("depth must be >= 1")
    if cfg.get("jobs", 1) < 1:
        raise ConfigError("jobs must be >= 1")
    try:
        cfg["window"] = TradingWindow.parse(cfg["window"]) if isinstance(cfg["window"], str) else cfg["window"]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _require_input(cfg: dict) -> Path:
    path = cfg.get("input")
    if not path:
        raise ConfigError("missing --input")
    path = Path(path)
    if not path.exists():
        raise IoError(f"input path does not exist: {path}")
    return path


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands ---------------------------------------------------------------

def cmd_build_books(cfg: dict) -> int:
    events = builder.read_events_ndjson(_require_input(cfg))
    samples = builder.sample_books(events, cfg["interval"], cfg["window"])
    out = _out_dir(cfg)
    builder.write_snapshot_series(samples, out / "books")
    log.info("wrote %d snapshots to %s", len(samples), out / "books")
    return 0


def cmd_fit(cfg: dict) -> int:
    snapshots = builder.read_snapshot_series(_require_input(cfg))
    if not snapshots:
        log.warning("no snapshots found; writing empty observations file")
    config = impact.FitConfig(depth_levels=cfg["depth"])
    observations, skipped = impact.extract_series(snapshots, config)
    for rec in skipped:
        log.warning("skipped %s: %s", format_iso_ns(rec.timestamp), rec.reason)
    out = _out_dir(cfg)
    impact.write_observations_csv(observations, out / "observations.csv")
    log.info("wrote %d observations (%d skipped)", len(observations), len(skipped))
    return 0


def cmd_deseasonalize(cfg: dict) -> int:
    observations, _ = impact.read_observations_csv(_require_input(cfg))
    profile = seasonal.fit_profile(observations, cfg["window"])
    adjusted = seasonal.deseasonalize(observations, profile)
    out = _out_dir(cfg)
    seasonal.write_profile_json(profile, out / "profile.json")
    impact.write_observations_csv(
        adjusted, out / "observations_deseasonalized.csv", deseasonalized=True
    )
    return 0


def cmd_calibrate(cfg: dict) -> int:
    observations, _ = impact.read_observations_csv(_require_input(cfg))
    series = StateSeries.from_observations(observations, cfg["interval"])
    result = calibrate(series)
    out = _out_dir(cfg)
    write_report_json(result, out / "report.json")
    log.info(
        "calibrated on %d pairs; stationary=%s", result.n_pairs, result.stationary
    )
    return 0


def _params_from_input(cfg: dict) -> SdeParams:
    return params_from_report(read_report_json(_require_input(cfg)))


def cmd_simulate(cfg: dict) -> int:
    doc = read_report_json(_require_input(cfg))
    params = params_from_report(doc)
    step = float(doc.get("step_seconds") or cfg["interval"])
    xi0 = dynamics.equilibrium(params)
    paths = dynamics.simulate(
        params, xi0, cfg["steps"], step, n_paths=cfg["paths"], seed=cfg["seed"]
    )
    out = _out_dir(cfg)
    import csv as _csv

    with open(out / "paths.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["path", "step", "ln_mid", "ln_beta_minus", "ln_beta_plus"])
        for p in range(paths.shape[0]):
            for k in range(paths.shape[1]):
                w.writerow(
                    [p, k] + [repr(float(v)) for v in paths[p, k]]
                )
    return 0


def cmd_impulse(cfg: dict) -> int:
    doc = read_report_json(_require_input(cfg))
    params = params_from_report(doc)
    step = float(doc.get("step_seconds") or cfg["interval"])
    spec = dynamics.ImpulseSpec(
        factor=cfg["factor"], magnitude=cfg["magnitude"], horizon=cfg["horizon"]
    )
    path = dynamics.impulse_response(params, spec, step_l=step)
    out = _out_dir(cfg)
    dynamics.write_response_csv(path, out / "impulse.csv")
    return 0


def cmd_equilibrium(cfg: dict) -> int:
    params = _params_from_input(cfg)
    xi = dynamics.equilibrium(params)
    print(json.dumps({"equilibrium": [float(v) for v in xi]}))
    return 0


def cmd_synth(cfg: dict) -> int:
    spec = cfg.get("synth")
    if not isinstance(spec, dict):
        raise ConfigError("synth command needs a 'synth' object in the config file")
    try:
        params = SdeParams(
            A=np.asarray(spec["A"], dtype=float),
            a=np.asarray(spec["a"], dtype=float),
            sigma=np.asarray(spec["Sigma"], dtype=float),
        )
        scfg = synth.SynthConfig(
            params=params,
            days=int(spec.get("days", 1)),
            window=cfg["window"],
            interval_sec=cfg["interval"],
            seed=cfg["seed"],
            start_date=spec.get("start_date", "2005-01-03"),
            tick=Decimal(str(spec.get("tick", "0.001"))),
            levels_per_side=int(spec.get("levels_per_side", 10)),
            shares_per_level=int(spec.get("shares_per_level", 2000)),
            beta_h_unit=float(spec.get("beta_h_unit", 1.0)),
            profile_minus=spec.get("profile_minus"),
            profile_plus=spec.get("profile_plus"),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad synth config: {exc}") from exc
    dataset = synth.generate(scfg)
    out = _out_dir(cfg)
    builder.write_events_ndjson(dataset.events, out / "events.ndjson")
    builder.write_snapshot_series(dataset.snapshots, out / "books")
    impact.write_observations_csv(dataset.observations, out / "true_observations.csv")
    log.info("synthesized %d snapshots over %d day(s)", len(dataset.snapshots), scfg.days)
    return 0


def cmd_run_all(cfg: dict) -> int:
    out = _out_dir(cfg)
    events = builder.read_events_ndjson(_require_input(cfg))
    samples = builder.sample_books(events, cfg["interval"], cfg["window"])
    builder.write_snapshot_series(samples, out / "books")

    config = impact.FitConfig(depth_levels=cfg["depth"])
    observations, skipped = impact.extract_series(samples, config)
    for rec in skipped:
        log.warning("skipped %s: %s", format_iso_ns(rec.timestamp), rec.reason)
    impact.write_observations_csv(observations, out / "observations.csv")

    profile = seasonal.fit_profile(observations, cfg["window"])
    adjusted = seasonal.deseasonalize(observations, profile)
    seasonal.write_profile_json(profile, out / "profile.json")
    impact.write_observations_csv(
        adjusted, out / "observations_deseasonalized.csv", deseasonalized=True
    )

    series = StateSeries.from_observations(adjusted, cfg["interval"])
    result = calibrate(series)
    write_report_json(result, out / "report.json")
    log.info("pipeline complete: %s", out / "report.json")
    return 0


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lobkit",
        description="Reduced-form limit order book pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "build-books": (cmd_build_books, "reconstruct sampled books from an event file"),
        "fit": (cmd_fit, "extract liquidity factors from book snapshots"),
        "deseasonalize": (cmd_deseasonalize, "remove intraday patterns from the factors"),
        "calibrate": (cmd_calibrate, "fit the linear SDE to a factor series"),
        "simulate": (cmd_simulate, "simulate state paths from a calibration report"),
        "impulse": (cmd_impulse, "impulse responses from a calibration report"),
        "equilibrium": (cmd_equilibrium, "print the equilibrium state of a report"),
        "synth": (cmd_synth, "generate a synthetic dataset with known truth"),
        "run-all": (cmd_run_all, "events to calibration report in one run"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--input", help="input path")
        p.add_argument("--out", help="output directory")
        p.add_argument("--interval", type=float, help="sampling interval, seconds")
        p.add_argument("--depth", type=int, help="price levels per side in the fit")
        p.add_argument("--window", help="daily trading window HH:MM-HH:MM")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--jobs", type=int, help="worker processes (reserved)")
        if name == "simulate":
            p.add_argument("--steps", type=int, help="simulation steps")
            p.add_argument("--paths", type=int, help="number of paths")
        if name == "impulse":
            p.add_argument("--factor", choices=sorted(dynamics.FACTOR_INDEX))
            p.add_argument("--magnitude", type=float, help="shock size, stationary stds")
            p.add_argument("--horizon", type=int, help="steps to track")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(cfg)
    except LobkitError as exc:
        json.dump(
            {"error": type(exc).__name__, "code": exc.code, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump(
            {"error": "IoError", "code": "lobkit.errors.IoError", "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
