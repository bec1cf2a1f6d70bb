"""Command-line harness.

Subcommands: simulate, extract, metrics, stats, sweep, gen-design.
Exit codes: 0 success, 1 config error, 2 runtime contract violation.
All configuration comes from flags and config files; no environment
variables are consulted.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .bits import hex_to_bits, read_bitstream, write_bitstream
from .errors import ConfigError, ContractError
from .extractor import recover_key
from .harness import (
    ScenarioConfig,
    default_config,
    gen_design,
    report_json,
    run_scenario,
    sweep,
)
from .hatch import (
    ORACLES,
    SimulationSetup,
    TriggerQuad,
    achievable_region,
    class_membership,
    load_design,
    save_design,
)
from .stats import format_battery, randomness_battery


def _load_json(path, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path}: invalid JSON ({exc})") from None


def _load_config(args) -> ScenarioConfig:
    data = _load_json(args.config, "config") if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return ScenarioConfig.from_dict(data)


def _write_text(path, text: str) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text)


def cmd_simulate(args) -> int:
    config = _load_config(args)
    result = run_scenario(config)
    if args.save_bits:
        write_bitstream(args.save_bits, result.received)
    _write_text(args.out, report_json(result.report))
    return 0


def cmd_extract(args) -> int:
    config = _load_config(args)
    bits = read_bitstream(args.bits)
    estimate, detection = recover_key(bits, config.extractor_config())
    true_key = hex_to_bits(config.key_hex)
    report = detection.to_dict()
    report["key_match"] = bool(
        estimate is not None and np.array_equal(estimate, true_key)
    )
    report["config"] = config.to_dict()
    _write_text(args.out, json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_metrics(args) -> int:
    config = _load_config(args)
    design_path = args.design or config.design_graph
    if design_path is None:
        raise ConfigError("design_graph: not set in config and --design not given")
    design = load_design(design_path)
    if not design.trigger_sets:
        raise ConfigError(f"{design_path}: design declares no trigger_sets")
    setup = SimulationSetup(
        host_config=config.host_config(),
        traffic_model=config.traffic,
        n_cycles=config.n_cycles,
        seed=config.seed,
    )
    region = achievable_region(
        design,
        design.trigger_sets,
        setup,
        oracle=ORACLES[config.oracle],
        alpha_trials=config.alpha_trials,
    )
    out = {
        "region": [
            {"label": ts.label, **quad.to_dict()}
            for ts, quad in zip(design.trigger_sets, region)
        ]
    }
    if args.bounds:
        d, t, alpha, l = args.bounds
        bounds = TriggerQuad(d=int(d), t=float(t), alpha=float(alpha), l=int(l))
        member = class_membership(region, bounds)
        out["bounds"] = bounds.to_dict()
        out["member"] = member
        print(
            f"membership vs (d={bounds.d}, t={bounds.t:g}, alpha={bounds.alpha}, "
            f"l={bounds.l}): {'MEMBER' if member else 'not a member'}"
        )
    _write_text(args.out, json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_stats(args) -> int:
    bits = read_bitstream(args.bits)
    try:
        reports = randomness_battery(bits, args.significance)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(format_battery(reports))
    if args.out:
        _write_text(args.out, json.dumps([r.to_dict() for r in reports], indent=2))
    return 0


def cmd_sweep(args) -> int:
    base = _load_json(args.config, "config") if args.config else default_config()
    if args.seed is not None:
        base["seed"] = args.seed
    grid = _load_json(args.grid, "grid")
    fieldnames, rows = sweep(base, grid, workers=args.workers)
    target = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(target, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            target.close()
    return 0


def cmd_gen_design(args) -> int:
    params = _load_json(args.params, "params")
    design = gen_design(params, seed=args.seed if args.seed is not None else 0)
    if args.out:
        save_design(design, args.out)
    else:
        print(json.dumps(design.to_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scramleak",
        description="Simulate and analyze the scrambler-based key-leak Trojan.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a full scenario and write a JSON report")
    p.add_argument("--config", help="scenario config JSON (default: built-in scenario)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--save-bits", help="also save the received bitstream to this path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="run the key extractor over a recorded bitstream")
    p.add_argument("--bits", required=True, help="packed bitstream file")
    p.add_argument("--config", help="scenario config for extractor parameters")
    p.add_argument("--out", help="detection report path (default: stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("metrics", help="compute the trigger-parameter region")
    p.add_argument("--config", help="scenario config JSON")
    p.add_argument("--design", help="design graph JSON (overrides config.design_graph)")
    p.add_argument(
        "--bounds",
        nargs=4,
        metavar=("D", "T", "ALPHA", "L"),
        help="also print class membership against these bounds",
    )
    p.add_argument("--out", help="region JSON path (default: stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("stats", help="randomness battery over a recorded bitstream")
    p.add_argument("--bits", required=True, help="packed bitstream file")
    p.add_argument("--significance", type=float, default=0.01)
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sweep", help="cross-product parameter sweep to CSV")
    p.add_argument("--config", help="base scenario config JSON")
    p.add_argument("--grid", required=True, help="JSON of {dotted.param: [values]}")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--seed", type=int, help="override the base config seed")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-design", help="generate a placed design graph JSON")
    p.add_argument("--params", required=True, help="module/trigger-set parameters JSON")
    p.add_argument("--out", help="design JSON path (default: stdout)")
    p.add_argument("--seed", type=int, help="placement seed (default 0)")
    p.set_defaults(func=cmd_gen_design)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ContractError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
