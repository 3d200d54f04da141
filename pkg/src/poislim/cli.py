"""Scenario-file-driven command line front end.

Scenarios are JSON documents (schema in README); the CLI only selects the
subcommand, paths, worker count, and n/replicates/seed overrides.  Exit
codes: 0 success, 2 configuration/parse error, 3 runtime or estimation error.

All numeric CSV output uses 17 significant digits, '.' decimals, ','
delimiters, and LF line endings.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments, limits, windows
from .errors import ConfigurationError, PoislimError
from .experiments import Scenario, run_scenario
from .intensity import make_model
from .simulate import RngStream, simulate_sample, write_events_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_scenario(path: str, overrides) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"scenario file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: scenario must be a JSON object")
    if overrides.n is not None:
        doc["n"] = [int(v) for v in overrides.n.split(",")]
    if overrides.replicates is not None:
        doc["replicates"] = overrides.replicates
    if overrides.seed is not None:
        doc["seed"] = overrides.seed
    return Scenario.from_dict(doc)


def _cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario, args)
    model = scenario.build_model()
    true_int = scenario.build_true_intensity(model)
    sample = simulate_sample(true_int, scenario.n[0], RngStream(scenario.seed, 0))
    write_events_csv(sample, args.out)
    print(f"wrote {sample.total_events()} events ({sample.n} trajectories) to {args.out}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    scenario = _load_scenario(args.scenario, args)
    report = run_scenario(scenario, workers=args.workers)
    table = f"{args.out_prefix}.table.csv"
    summary = f"{args.out_prefix}.summary.json"
    report.write_table_csv(table)
    report.write_summary_json(summary)
    print(f"wrote {table} and {summary} ({report.summary['failures']} failed replicates)")
    return EXIT_OK


def _parse_kv(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigurationError(f"expected key=value, got {pair!r}")
        key, val = pair.split("=", 1)
        out[key] = float(val)
    return out


def _cmd_limits(args) -> int:
    params = _parse_kv(args.set)
    if args.scenario:
        scenario = _load_scenario(args.scenario, args)
        model = scenario.build_model()
        true_int = scenario.build_true_intensity(model)
        limit = limits.limit_params(args.regime, model, scenario.theta0,
                                    true_intensity=true_int)
        seed = scenario.seed
    else:
        limit = _limit_from_params(args.regime, params)
        seed = args.seed if args.seed is not None else 0
    draws = limits.sample_limit_batch(limit, RngStream(seed, 0), args.which, args.samples)
    with open(args.out, "w", newline="") as fh:
        fh.write("draw\n")
        for v in draws:
            fh.write(f"{v:.17g}\n")
    print(f"wrote {draws.size} {args.which} draws for regime {limit.regime} to {args.out}")
    return EXIT_OK


def _limit_from_params(regime: str, params: dict) -> limits.RegimeLimit:
    """Build a RegimeLimit from explicit key=value parameters."""
    if regime == "regular":
        return limits.RegimeLimit(regime, 0.5, {"fisher_information": params["I"]})
    if regime == "misspecified":
        return limits.RegimeLimit(regime, 0.5, {"d_big_sq": params["D2"]})
    if regime == "null-fisher":
        return limits.RegimeLimit(regime, 1.0 / 6.0, {"i3": params["I3"]})
    if regime == "disc-fisher":
        return limits.RegimeLimit(regime, 0.5, {
            "info_left": params["I_left"], "info_right": params["I_right"],
            "corr": params["corr"]})
    if regime == "boundary":
        return limits.RegimeLimit(regime, 0.5, {
            "fisher_information": params["I"],
            "orientation": params.get("orientation", 1.0)})
    if regime == "cusp":
        kappa = params["kappa"]
        return limits.RegimeLimit(regime, 1.0 / (2.0 * (kappa + 0.5)), {
            "kappa": kappa, "hurst": kappa + 0.5, "gamma_sq": params["gamma_sq"],
            "grid_halfwidth": params.get("halfwidth", 20.0),
            "grid_points": int(params.get("grid_points", 2001))})
    if regime == "jump":
        return limits.RegimeLimit(regime, 1.0, {
            "lam_left": params["lam_left"], "lam_right": params["lam_right"],
            "u_halfwidth": params.get("halfwidth", 60.0)})
    raise ConfigurationError(
        f"regime {regime!r} needs a scenario file (no direct parameter form)"
    )


def _cmd_windows(args) -> int:
    params = {}
    if args.params:
        params = json.loads(args.params)
    model = make_model(args.model, params=params)
    win = windows.optimal_window(model, args.theta, args.mu_star)
    doc = {
        "model": args.model, "theta": args.theta, "mu_star": args.mu_star,
        "threshold": windows.level_threshold(model, args.theta, args.mu_star),
        "intervals": win.to_json_obj(), "measure": win.measure,
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote optimal window ({len(win.intervals)} intervals, "
          f"measure {win.measure:.6g}) to {args.out}")
    return EXIT_OK


def _parse_grid(text: str):
    lo, hi, count = text.split(":")
    return np.linspace(float(lo), float(hi), int(count))


def _cmd_region_map(args) -> int:
    xs = [float(v) for v in args.x.split(",")]
    h1 = _parse_grid(args.h1)
    h2 = _parse_grid(args.h2)
    result = experiments.region_scan(xs, h1, h2, theta0=args.theta0,
                                     grid_size=args.grid_size)
    with open(args.out, "w", newline="") as fh:
        fh.write("x,h1,h2,kl_consistent,predicted\n")
        for ix, x in enumerate(result.x_grid):
            for i1, a in enumerate(result.h1_grid):
                for i2, b in enumerate(result.h2_grid):
                    fh.write(f"{x:.17g},{a:.17g},{b:.17g},"
                             f"{int(result.kl_consistent[ix, i1, i2])},"
                             f"{int(result.predicted[ix, i1, i2])}\n")
    print(f"wrote region map to {args.out} (agreement {result.agreement:.4f})")
    return EXIT_OK


def _add_overrides(sub):
    sub.add_argument("--n", default=None, help="override n (comma-separated list)")
    sub.add_argument("--replicates", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poislim",
        description="Poisson-process estimation experiments: simulate, estimate, "
                    "and compare normalized errors against regime limit laws.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write one simulated sample as an event CSV")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    _add_overrides(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("experiment", help="run a replicated scenario")
    p.add_argument("scenario")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_overrides(p)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("limits", help="dump limit-law draws as a single-column CSV")
    p.add_argument("--regime", required=True, choices=limits.REGIMES)
    p.add_argument("--scenario", default=None)
    p.add_argument("--set", nargs="*", default=None, metavar="KEY=VALUE")
    p.add_argument("--which", choices=("mle", "bayes"), default="mle")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--out", required=True)
    _add_overrides(p)
    p.set_defaults(fn=_cmd_limits)

    p = sub.add_parser("windows", help="write the optimal observation window as JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--mu-star", type=float, required=True, dest="mu_star")
    p.add_argument("--params", default=None, help="model params as a JSON object")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_windows)

    p = sub.add_parser("region-map", help="consistency-region scan as a CSV matrix")
    p.add_argument("--x", required=True, help="comma-separated ratios > 1")
    p.add_argument("--h1", required=True, help="grid lo:hi:count")
    p.add_argument("--h2", required=True, help="grid lo:hi:count")
    p.add_argument("--theta0", type=float, default=0.5)
    p.add_argument("--grid-size", type=int, default=20001, dest="grid_size")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_region_map)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PoislimError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
