"""Experiment harness: scenario configs, end-to-end runs, sweeps, reports.

A scenario config is a flat JSON document (see default_config()). Every
random draw is tied to a seed recorded in the config echo, so a report is a
pure function of its config; the wall_clock_s field is the one exception.
"""
from __future__ import annotations

import copy
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bits import hex_to_bits
from .channel import ChannelModel, apply_channel
from .errors import ConfigError
from .extractor import ExtractorConfig, recover_key
from .hatch import (
    ORACLES,
    DesignGraph,
    ModuleDecl,
    SimulationSetup,
    TriggerQuad,
    TriggerStateSet,
    Wire,
    implicit_behavior_factor,
    load_design,
    measure_payload_delay,
    trigger_dimension,
    trigger_locality,
)
from .host import (
    DEFAULT_KEY_HEX,
    HostConfig,
    KeyMaterial,
    TrafficModel,
    generate_traffic,
    run_host,
)
from .lfsr import DEFAULT_TAPS, DEFAULT_WIDTH, LfsrConfig
from .stats import MIN_BITS, randomness_battery


def default_config() -> dict:
    """The all-idle, clean-channel baseline scenario."""
    return {
        "key_hex": DEFAULT_KEY_HEX,
        "lfsr": {"width": DEFAULT_WIDTH, "taps": list(DEFAULT_TAPS)},
        "window_len": 128,
        "thresholds": {"lo": 3, "hi": 125},
        "traffic": {"busy_prob": 0.0, "burst_len_mean": 256.0, "seed": None},
        "channel": {"flip_prob": 0.0, "seed": None},
        "n_cycles": 16640,
        "seed": 1,
        "design_graph": None,
        "oracle": "functional",
        "alpha_trials": 16,
        "alpha_n_cycles": 2048,
        "stats_significance": 0.01,
    }


_SWEEPABLE = {
    "key_hex",
    "window_len",
    "n_cycles",
    "seed",
    "lfsr.width",
    "lfsr.taps",
    "thresholds.lo",
    "thresholds.hi",
    "traffic.busy_prob",
    "traffic.burst_len_mean",
    "traffic.seed",
    "channel.flip_prob",
    "channel.seed",
}


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{field}: {message}")


@dataclass
class ScenarioConfig:
    key_hex: str
    lfsr: LfsrConfig
    window_len: int
    lo_threshold: int
    hi_threshold: int
    traffic: TrafficModel
    channel: ChannelModel
    n_cycles: int
    seed: int
    design_graph: str | None
    oracle: str
    alpha_trials: int
    alpha_n_cycles: int
    stats_significance: float

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        base = default_config()
        unknown = set(data) - set(base)
        _require(not unknown, "config", f"unknown fields {sorted(unknown)}")
        merged = copy.deepcopy(base)
        for key, value in data.items():
            if isinstance(value, dict) and isinstance(merged[key], dict):
                bad = set(value) - set(merged[key])
                _require(not bad, key, f"unknown fields {sorted(bad)}")
                merged[key].update(value)
            else:
                merged[key] = value

        seed = merged["seed"]
        _require(isinstance(seed, int) and seed >= 0, "seed", "must be a non-negative integer")
        derived = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
        traffic_seed = merged["traffic"]["seed"]
        if traffic_seed is None:
            traffic_seed = int(derived[0])
        channel_seed = merged["channel"]["seed"]
        if channel_seed is None:
            channel_seed = int(derived[1])

        key_bits = hex_to_bits(merged["key_hex"])
        _require(key_bits.size == 128, "key_hex", "must encode exactly 128 bits")
        try:
            lfsr = LfsrConfig(
                width=int(merged["lfsr"]["width"]),
                taps=tuple(merged["lfsr"]["taps"]),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"lfsr: {exc}") from None
        window_len = merged["window_len"]
        _require(
            isinstance(window_len, int) and window_len >= 1,
            "window_len",
            "must be a positive integer",
        )
        lo = merged["thresholds"]["lo"]
        hi = merged["thresholds"]["hi"]
        _require(
            isinstance(lo, int) and isinstance(hi, int) and 0 <= lo < hi <= window_len,
            "thresholds",
            f"must satisfy 0 <= lo < hi <= window_len, got lo={lo} hi={hi}",
        )
        try:
            traffic = TrafficModel(
                busy_prob=float(merged["traffic"]["busy_prob"]),
                burst_len_mean=float(merged["traffic"]["burst_len_mean"]),
                seed=traffic_seed,
            )
        except ValueError as exc:
            raise ConfigError(f"traffic: {exc}") from None
        try:
            channel = ChannelModel(
                flip_prob=float(merged["channel"]["flip_prob"]), seed=channel_seed
            )
        except ValueError as exc:
            raise ConfigError(f"channel: {exc}") from None
        n_cycles = merged["n_cycles"]
        _require(
            isinstance(n_cycles, int) and n_cycles >= 1,
            "n_cycles",
            "must be a positive integer",
        )
        oracle = merged["oracle"]
        _require(oracle in ORACLES, "oracle", f"must be one of {sorted(ORACLES)}")
        alpha_trials = merged["alpha_trials"]
        _require(
            isinstance(alpha_trials, int) and alpha_trials >= 1,
            "alpha_trials",
            "must be a positive integer",
        )
        sig = merged["stats_significance"]
        _require(sig in (0.05, 0.01, 0.001), "stats_significance", "must be 0.05, 0.01 or 0.001")
        return cls(
            key_hex=merged["key_hex"],
            lfsr=lfsr,
            window_len=window_len,
            lo_threshold=lo,
            hi_threshold=hi,
            traffic=traffic,
            channel=channel,
            n_cycles=n_cycles,
            seed=seed,
            design_graph=merged["design_graph"],
            oracle=oracle,
            alpha_trials=alpha_trials,
            alpha_n_cycles=int(merged["alpha_n_cycles"]),
            stats_significance=sig,
        )

    def to_dict(self) -> dict:
        """Fully resolved echo; feeding it back reproduces the same run."""
        return {
            "key_hex": self.key_hex,
            "lfsr": {"width": self.lfsr.width, "taps": list(self.lfsr.taps)},
            "window_len": self.window_len,
            "thresholds": {"lo": self.lo_threshold, "hi": self.hi_threshold},
            "traffic": {
                "busy_prob": self.traffic.busy_prob,
                "burst_len_mean": self.traffic.burst_len_mean,
                "seed": self.traffic.seed,
            },
            "channel": {"flip_prob": self.channel.flip_prob, "seed": self.channel.seed},
            "n_cycles": self.n_cycles,
            "seed": self.seed,
            "design_graph": self.design_graph,
            "oracle": self.oracle,
            "alpha_trials": self.alpha_trials,
            "alpha_n_cycles": self.alpha_n_cycles,
            "stats_significance": self.stats_significance,
        }

    def host_config(self) -> HostConfig:
        return HostConfig(
            key=KeyMaterial.from_hex(self.key_hex),
            lfsr=self.lfsr,
            window_len=self.window_len,
        )

    def extractor_config(self) -> ExtractorConfig:
        return ExtractorConfig(
            lfsr=self.lfsr,
            window_len=self.window_len,
            lo_threshold=self.lo_threshold,
            hi_threshold=self.hi_threshold,
            key_len=128,
        )


@dataclass
class ScenarioResult:
    report: dict
    bitstream: np.ndarray  # host output, pre-channel
    received: np.ndarray  # what the malicious receiver sees


def run_scenario(config: ScenarioConfig | dict) -> ScenarioResult:
    """host -> channel -> extractor -> trigger metrics -> stats, all seeded."""
    if isinstance(config, dict):
        config = ScenarioConfig.from_dict(config)
    t_start = time.perf_counter()

    host_cfg = config.host_config()
    trace = generate_traffic(config.traffic, config.n_cycles)
    run = run_host(host_cfg, trace, config.n_cycles)
    received = apply_channel(run.bitstream, config.channel)
    estimate, detection = recover_key(received, config.extractor_config())

    true_key = hex_to_bits(config.key_hex)
    key_recovered = estimate is not None and np.array_equal(estimate, true_key)
    delay = measure_payload_delay(run.trigger_log, true_key.size)

    idle_bits = run.bitstream[~run.busy]
    battery = None
    if idle_bits.size >= MIN_BITS:
        battery = [
            r.to_dict() for r in randomness_battery(idle_bits, config.stats_significance)
        ]

    quad = None
    region = None
    if config.design_graph is not None:
        design = load_design(config.design_graph)
        alpha_setup = SimulationSetup(
            host_config=host_cfg,
            traffic_model=config.traffic,
            n_cycles=config.alpha_n_cycles,
            seed=config.seed,
        )
        alpha = implicit_behavior_factor(
            alpha_setup, ORACLES[config.oracle], config.alpha_trials
        ).alpha
        region = [
            TriggerQuad(
                d=trigger_dimension(design, ts),
                t=delay.as_number(),
                alpha=alpha,
                l=trigger_locality(design, ts),
            ).to_dict()
            for ts in design.trigger_sets
        ]
        quad = region[0] if region else None

    report = {
        "config": config.to_dict(),
        "seed": config.seed,
        "key_recovered": bool(key_recovered),
        "key_estimate_hex": None
        if estimate is None
        else np.packbits(estimate).tobytes().hex(),
        "detected_bit_count": len(detection.detected_bits),
        "window_verdicts": {
            "bit0": detection.n_bit0,
            "bit1": detection.n_bit1,
            "non_key": detection.n_nonkey,
        },
        "window_counter_histogram": detection.counter_histogram,
        "payload_delay": {"status": delay.status, "cycles": delay.cycles},
        "quad": quad,
        "region": region,
        "stats_battery": battery,
        "extraction": detection.to_dict(),
        "wall_clock_s": time.perf_counter() - t_start,
    }
    return ScenarioResult(report=report, bitstream=run.bitstream, received=received)


def _set_path(config: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = config
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def _sweep_cell(args) -> dict:
    overrides, base = args
    cfg = copy.deepcopy(base)
    for dotted, value in overrides:
        _set_path(cfg, dotted, value)
    result = run_scenario(cfg)
    report = result.report
    row = {dotted: value for dotted, value in overrides}
    estimate_hex = report["key_estimate_hex"]
    wrong_bits = ""
    if estimate_hex is not None:
        est = hex_to_bits(estimate_hex)
        true = hex_to_bits(report["config"]["key_hex"])
        wrong_bits = int(np.count_nonzero(est != true))
    row.update(
        {
            "key_recovered": report["key_recovered"],
            "t_status": report["payload_delay"]["status"],
            "t_cycles": report["payload_delay"]["cycles"],
            "detected_bits": report["detected_bit_count"],
            "wrong_key_bits": wrong_bits,
            "bit0_windows": report["window_verdicts"]["bit0"],
            "bit1_windows": report["window_verdicts"]["bit1"],
            "nonkey_windows": report["window_verdicts"]["non_key"],
        }
    )
    return row


def sweep(base_config: dict, grid: dict, workers: int = 1) -> tuple[list[str], list[dict]]:
    """Cross-product parameter sweep; one row per run, rows in grid order.

    Grid keys are dotted config paths (e.g. "traffic.busy_prob"); unknown
    names are rejected before anything runs. Cells are independent and may
    run across `workers` processes; output order is grid order regardless.
    """
    unknown = set(grid) - _SWEEPABLE
    if unknown:
        raise ConfigError(
            f"grid: unknown parameters {sorted(unknown)}; sweepable: {sorted(_SWEEPABLE)}"
        )
    for name, values in grid.items():
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(f"grid.{name}: must be a non-empty list of values")
    # validate the base config up front so failures happen before the pool
    ScenarioConfig.from_dict(base_config)

    names = list(grid)
    cells = [
        tuple(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))
    ]
    tasks = [(cell, base_config) for cell in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    fieldnames = names + [
        "key_recovered",
        "t_status",
        "t_cycles",
        "detected_bits",
        "wrong_key_bits",
        "bit0_windows",
        "bit1_windows",
        "nonkey_windows",
    ]
    return fieldnames, rows


def _boxes_overlap(a, b) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return min(ax1, bx1) > max(ax0, bx0) and min(ay1, by1) > max(ay0, by0)


def gen_design(params: dict, seed: int = 0) -> DesignGraph:
    """Deterministically place wires inside module bounding boxes.

    params: {"modules": [{"name", "declared_wire_count", "bbox": [x0,y0,x1,y1],
    "placed_wires": n}], "trigger_sets": [{"label", "modules": [...],
    "wires": [...]}]}. Generated wire ids are "<module>_w<i>". Overlapping
    module boxes are rejected.
    """
    try:
        mod_params = params["modules"]
    except (KeyError, TypeError):
        raise ConfigError("params: missing 'modules' list") from None
    if not mod_params:
        raise ConfigError("params.modules: must be non-empty")
    boxes = []
    for m in mod_params:
        try:
            boxes.append((m["name"], tuple(int(v) for v in m["bbox"])))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"params.modules: malformed entry {m!r}") from None
    for (name_a, box_a), (name_b, box_b) in itertools.combinations(boxes, 2):
        if _boxes_overlap(box_a, box_b):
            raise ConfigError(f"modules {name_a!r} and {name_b!r} have overlapping boxes")

    rng = np.random.Generator(np.random.Philox(seed))
    modules = []
    wires = []
    for m in mod_params:
        name = m["name"]
        declared = int(m["declared_wire_count"])
        x0, y0, x1, y1 = (int(v) for v in m["bbox"])
        n_placed = int(m.get("placed_wires", 0))
        if n_placed > declared:
            raise ConfigError(f"module {name!r}: placed_wires exceeds declared_wire_count")
        modules.append(ModuleDecl(name=name, declared_wire_count=declared, bbox=(x0, y0, x1, y1)))
        xs = rng.integers(x0, x1 + 1, n_placed)
        ys = rng.integers(y0, y1 + 1, n_placed)
        for i in range(n_placed):
            wires.append(Wire(f"{name}_w{i}", int(xs[i]), int(ys[i]), name))
    trigger_sets = [
        TriggerStateSet(
            label=ts["label"],
            wire_ids=tuple(ts.get("wires", ())),
            module_refs=tuple(ts.get("modules", ())),
        )
        for ts in params.get("trigger_sets", ())
    ]
    return DesignGraph(wires=wires, modules=modules, trigger_sets=trigger_sets)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
