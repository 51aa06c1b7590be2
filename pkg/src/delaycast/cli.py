"""Command-line entry point.

Every subcommand writes its outputs plus ``manifest.json`` (effective
configuration, input checksums, package versions, timings) into ``--out``.
Settings resolve as: command-line flag, then ``--config`` JSON, then default.

Exit codes: 0 success, 2 input error, 3 numerical non-convergence,
4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import GROUPS, bootstrap_benchmark, fit_on_split, permutation_importance
from .data import DataError, parse_daily_csv, parse_event_csv, synth_daily, write_daily_csv, write_event_csv
from .diagnostics import (cumulative_calibration, ecdf_pairs, fit_gamma3, histogram, kernel_curve,
                          ks_exp1, rice_bins, time_rescale, write_rows)
from .features import Blend, Representation
from .hawkes import (FitOptions, HawkesParams, InsufficientDataError, NonConvergenceError, fit_mle,
                     load_params)
from .models import KINDS
from .simulate import (forecast_days, next_event_rmse, score_daily_rmse, simulate, write_daily_forecasts,
                       daily_forecasts_json)

log = logging.getLogger("delaycast")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGENCE, EXIT_INTERNAL = 0, 2, 3, 4

DEFAULTS = {
    "ingest": {"schema": None, "max_gap": None},
    "synth": {"days": 1671, "weekly_amplitude": 50.0, "seasonal_amplitude": 20.0, "weather_effect": 0.0,
              "noise_sd": 10.0, "base": 100.0, "start": "2019-01-01", "seed": 0},
    "fit-hawkes": {"origin": None, "end": None, "restarts": 5, "tolerance": 1e-8, "max_iter": 500,
                   "seed": 0, "threads": 1, "diagnose": False, "grid": 200},
    "simulate": {"params": None, "mu": None, "alpha": None, "beta": None, "hours": 1000.0,
                 "origin": "2019-01-01T00:00:00", "seed": 0, "max_events": None},
    "diagnose": {"params": None, "origin": None, "end": None, "grid": 200},
    "forecast": {"params": None, "origin": None, "end": None, "mode": "compensator", "samples": 1000,
                 "seed": 0, "next_event": False, "eval_fraction": 0.2},
    "benchmark": {"schema": None, "models": list(KINDS), "cycles": 100, "seed": 0, "threads": 1,
                  "train_fraction": 0.8, "window": 5, "resample": "sorted", "selection": "test",
                  "scaling": "train"},
    "importance": {"schema": None, "model": "random_forest", "blend": "lag+dow+season+weather",
                   "representation": "raw", "repeats": 10, "seed": 0, "train_fraction": 0.8, "window": 5},
}


class InputError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _versions() -> dict:
    import numba
    import scipy
    return {"delaycast": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def _datetime(text):
    return None if text is None else dt.datetime.fromisoformat(text)


def _first_midnight(path) -> dt.datetime:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    stamps = [dt.datetime.fromisoformat(r[0].strip()) for r in rows if r and r[0].strip()]
    if not stamps:
        raise InputError(f"{path}: no events")
    first = min(stamps)
    return dt.datetime(first.year, first.month, first.day)


def _events(cfg):
    origin = _datetime(cfg["origin"]) or _first_midnight(cfg["events"])
    return parse_event_csv(cfg["events"], origin, _datetime(cfg["end"])), origin


def _params(cfg) -> HawkesParams:
    if cfg.get("params"):
        return load_params(cfg["params"])
    if None in (cfg.get("mu"), cfg.get("alpha"), cfg.get("beta")):
        raise InputError("give --params or all of --mu --alpha --beta")
    return HawkesParams(cfg["mu"], cfg["alpha"], cfg["beta"])


# --- commands ---------------------------------------------------------------

def cmd_ingest(cfg, out: Path) -> dict:
    summary = {}
    if cfg.get("daily"):
        series = parse_daily_csv(cfg["daily"], cfg["schema"], cfg["max_gap"])
        write_daily_csv(series, out / "daily.csv")
        summary["daily"] = series.summary()
        y = series.targets
        bins = rice_bins(len(y))
        write_rows(out / "histogram.csv", ["bin_left", "bin_right", "count"], histogram(y, bins))
        summary["daily"]["rice_bins"] = bins
        try:
            g = fit_gamma3(y)
            summary["daily"]["gamma_fit"] = {"shape": g.shape, "scale": g.scale, "location": g.location}
        except ValueError as exc:
            summary["daily"]["gamma_fit"] = {"error": str(exc)}
    if cfg.get("events"):
        events, origin = _events(cfg)
        write_event_csv(events, out / "events.csv", origin)
        summary["events"] = {"n_events": len(events), "origin": origin.isoformat(),
                             "horizon_hours": events.horizon}
    if not summary:
        raise InputError("ingest needs --daily and/or --events")
    _dump(out / "summary.json", summary)
    for part in summary.values():
        print(json.dumps({k: v for k, v in part.items() if k != "gaps"}, sort_keys=True))
    return summary


def cmd_synth(cfg, out: Path) -> dict:
    series = synth_daily(cfg["days"], cfg["weekly_amplitude"], cfg["seasonal_amplitude"],
                         cfg["weather_effect"], cfg["noise_sd"], cfg["seed"], base=cfg["base"],
                         start=dt.date.fromisoformat(cfg["start"]))
    write_daily_csv(series, out / "daily.csv")
    return {"rows": len(series)}


def _diagnose(params, events, out: Path, grid: int) -> dict:
    u = time_rescale(params, events)
    ks = ks_exp1(u)
    write_rows(out / "rescaled.csv", ["u"], ([v] for v in u.u))
    write_rows(out / "ecdf.csv", ["u", "ecdf", "exp1_cdf"], ecdf_pairs(u))
    write_rows(out / "rescaled_histogram.csv", ["bin_left", "bin_right", "count"],
               histogram(u.u, rice_bins(len(u))))
    write_rows(out / "calibration.csv", ["t", "observed", "expected"], cumulative_calibration(params, events, grid))
    write_rows(out / "kernel.csv", ["u", "g"], kernel_curve(params))
    result = {"ks_d": ks.d_statistic, "ks_p": ks.p_value, "n": ks.n,
              "final_observed": len(events),
              "final_expected": float(cumulative_calibration(params, events, 2)[-1, 2])}
    _dump(out / "diagnostics.json", result)
    return result


def cmd_fit_hawkes(cfg, out: Path) -> dict:
    events, _ = _events(cfg)
    options = FitOptions(n_restarts=cfg["restarts"], max_iterations=cfg["max_iter"],
                         tolerance=cfg["tolerance"], seed=cfg["seed"], threads=cfg["threads"])
    try:
        result = fit_mle(events, options)
    except NonConvergenceError as exc:
        if exc.result is not None:
            _dump(out / "fit.json", {**exc.result.to_dict(), "seed": cfg["seed"]})
        raise
    _dump(out / "fit.json", {**result.to_dict(), "seed": cfg["seed"]})
    p = result.params
    print(f"{'mu':>10} {'alpha':>10} {'beta':>10} {'n':>8} {'t_half(h)':>10} {'loglik':>14}")
    print(f"{p.mu:10.4f} {p.alpha:10.4f} {p.beta:10.4f} {p.branching_ratio:8.3f} {p.half_life:10.4f} "
          f"{result.log_likelihood:14.3f}")
    summary = {"fit": result.to_dict()}
    if cfg["diagnose"]:
        summary["diagnostics"] = _diagnose(p, events, out, cfg["grid"])
    return summary


def cmd_simulate(cfg, out: Path) -> dict:
    params = _params(cfg)
    events = simulate(params, None, 0.0, float(cfg["hours"]), cfg["seed"], cfg["max_events"])
    write_event_csv(events, out / "events.csv", _datetime(cfg["origin"]))
    return {"n_events": len(events)}


def cmd_diagnose(cfg, out: Path) -> dict:
    params = _params(cfg)
    events, _ = _events(cfg)
    return _diagnose(params, events, out, cfg["grid"])


def cmd_forecast(cfg, out: Path) -> dict:
    params = _params(cfg)
    events, _ = _events(cfg)
    forecasts = forecast_days(params, events, mode=cfg["mode"], n_samples=cfg["samples"], seed=cfg["seed"])
    observed = events.daily_counts()[:len(forecasts)]
    write_daily_forecasts(out / "daily_forecast.csv", forecasts, observed)
    (out / "daily_forecast.json").write_text(daily_forecasts_json(forecasts, observed) + "\n", encoding="utf-8")
    result = {"mode": cfg["mode"], "days": len(forecasts), "seed": cfg["seed"],
              "daily_rmse": score_daily_rmse(forecasts, observed),
              "total_expected": float(sum(f.expected_count for f in forecasts))}
    if cfg["next_event"]:
        r, _, _ = next_event_rmse(params, events, cfg["eval_fraction"], cfg["samples"], cfg["seed"])
        result["next_event_rmse_hours"] = r
    _dump(out / "forecast.json", result)
    print(json.dumps(result, sort_keys=True))
    return result


def cmd_benchmark(cfg, out: Path) -> dict:
    series = parse_daily_csv(cfg["daily"], cfg["schema"])

    def progress(c, total):
        log.info("cycle %d/%d", c + 1, total)

    report = bootstrap_benchmark(series, models=cfg["models"], n_cycles=cfg["cycles"], seed=cfg["seed"],
                                 progress=progress, threads=cfg["threads"],
                                 train_fraction=cfg["train_fraction"], window=cfg["window"],
                                 resample=cfg["resample"], selection=cfg["selection"], scaling=cfg["scaling"])
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    report.write_performance_csv(out / "model_performance.csv")
    report.write_group_csv(out / "group_deltas.csv")
    deltas = report.group_deltas
    print("group deltas (negative = improvement): "
          + ", ".join(f"{g}={deltas[g]:+.3f}" for g in GROUPS if deltas[g] is not None))
    return {"counts": report.counts, "group_deltas": deltas}


def cmd_importance(cfg, out: Path) -> dict:
    series = parse_daily_csv(cfg["daily"], cfg["schema"])
    model, _, test = fit_on_split(series, cfg["model"], Blend.from_label(cfg["blend"]),
                                  Representation(cfg["representation"]), cfg["train_fraction"],
                                  cfg["window"], cfg["seed"])
    ranking = permutation_importance(model, test.X, test.y, cfg["repeats"], cfg["seed"], test.feature_names)
    write_rows(out / "importance.csv", ["feature", "mean_delta_rmse"], ranking)
    for name, v in ranking[:10]:
        print(f"{name:32s} {v:+.4f}")
    return {"top": ranking[0][0], "method": "permutation"}


COMMANDS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "fit-hawkes": cmd_fit_hawkes, "simulate": cmd_simulate,
    "diagnose": cmd_diagnose, "forecast": cmd_forecast, "benchmark": cmd_benchmark,
    "importance": cmd_importance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delaycast", description=__doc__.splitlines()[0],
                                     argument_default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        # subparsers do not inherit argument_default; unset flags must stay absent
        return sub.add_parser(name, argument_default=argparse.SUPPRESS, **kw)

    def common(p, seed=True):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON file with settings for this command")
        if seed:
            p.add_argument("--seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true")

    def event_inputs(p):
        p.add_argument("--events", required=True, help="event timestamp CSV")
        p.add_argument("--origin", help="ISO datetime for t=0 (default: midnight of the first event)")
        p.add_argument("--end", help="ISO datetime closing the observation window")

    def param_inputs(p):
        p.add_argument("--params", help="fit.json or parameter JSON")
        p.add_argument("--mu", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)

    p = add("ingest", help="validate and canonicalize input CSVs")
    common(p, seed=False)
    p.add_argument("--daily")
    p.add_argument("--events")
    p.add_argument("--origin")
    p.add_argument("--end")
    p.add_argument("--schema", type=json.loads, help='column map as JSON, e.g. \'{"target": "delays"}\'')
    p.add_argument("--max-gap", dest="max_gap", type=int)

    p = add("synth", help="write a synthetic daily series")
    common(p)
    p.add_argument("--days", type=int)
    p.add_argument("--weekly-amplitude", dest="weekly_amplitude", type=float)
    p.add_argument("--seasonal-amplitude", dest="seasonal_amplitude", type=float)
    p.add_argument("--weather-effect", dest="weather_effect", type=float)
    p.add_argument("--noise-sd", dest="noise_sd", type=float)
    p.add_argument("--base", type=float)
    p.add_argument("--start")

    p = add("fit-hawkes", help="maximum-likelihood Hawkes fit")
    common(p)
    event_inputs(p)
    p.add_argument("--restarts", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--diagnose", action="store_true")
    p.add_argument("--grid", type=int)

    p = add("simulate", help="simulate events by Ogata thinning")
    common(p)
    param_inputs(p)
    p.add_argument("--hours", type=float)
    p.add_argument("--origin")
    p.add_argument("--max-events", dest="max_events", type=int)

    p = add("diagnose", help="time-rescaling, KS test, calibration, kernel curve")
    common(p, seed=False)
    event_inputs(p)
    param_inputs(p)
    p.add_argument("--grid", type=int)

    p = add("forecast", help="daily and next-event Hawkes forecasts")
    common(p)
    event_inputs(p)
    param_inputs(p)
    p.add_argument("--mode", choices=("compensator", "monte_carlo"))
    p.add_argument("--samples", type=int)
    p.add_argument("--next-event", dest="next_event", action="store_true")
    p.add_argument("--eval-fraction", dest="eval_fraction", type=float)

    p = add("benchmark", help="bootstrap model/blend comparison")
    common(p)
    p.add_argument("--daily", required=True)
    p.add_argument("--schema", type=json.loads)
    p.add_argument("--models", nargs="+", choices=KINDS)
    p.add_argument("--cycles", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--resample", choices=("sorted", "train_only"))
    p.add_argument("--selection", choices=("test", "validation"))
    p.add_argument("--scaling", choices=("train", "full"))

    p = add("importance", help="permutation feature importance")
    common(p)
    p.add_argument("--daily", required=True)
    p.add_argument("--schema", type=json.loads)
    p.add_argument("--model", choices=KINDS)
    p.add_argument("--blend")
    p.add_argument("--representation", choices=[r.value for r in Representation])
    p.add_argument("--repeats", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--window", type=int)
    return parser


def resolve_config(command: str, args: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    if "config" in args:
        with open(args["config"], encoding="utf-8") as fh:
            cfg.update(json.load(fh))
    cfg.update({k: v for k, v in args.items() if k not in ("config", "command", "verbose")})
    return cfg


def _check_paths(cfg):
    for key in ("daily", "events", "params", "config"):
        if cfg.get(key) and not Path(cfg[key]).is_file():
            raise InputError(f"{key} file not found: {cfg[key]}")


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(level=logging.INFO if args.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args["command"]
    started = time.time()
    try:
        cfg = resolve_config(command, args)
        _check_paths(cfg)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[command](cfg, out)
        code = EXIT_OK
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (InputError, DataError, InsufficientDataError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    inputs = {k: {"path": str(cfg[k]), "sha256": _sha256(cfg[k])}
              for k in ("daily", "events", "params") if cfg.get(k)}
    _dump(out / "manifest.json", {
        "command": command, "config": {k: v for k, v in cfg.items()}, "inputs": inputs,
        "seed": cfg.get("seed"), "versions": _versions(),
        "started": dt.datetime.fromtimestamp(started, dt.timezone.utc).isoformat(),
        "elapsed_seconds": time.time() - started, "result": result,
    })
    return code


if __name__ == "__main__":
    sys.exit(main())
