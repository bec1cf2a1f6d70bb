"""Trigger-parameter analysis over an abstract design graph.

Four numbers characterize a trigger-state set: d (wires in the trigger
circuitry), t (cycles from trigger to full payload delivery), alpha
(probability a triggered run shows no explicit malicious behavior) and
l (geographic spread of the trigger wires). Each trigger set yields one
(d, t, alpha, l) quadruple; the set of quadruples is the design's
achievable region, and class membership against a bound quadruple asks
whether some region point is componentwise <= the bounds.

The design graph is abstract: modules declare wire counts and bounding
boxes, with individually placed wires where it matters. d for a
whole-module reference is the declared count - a configured figure, not a
measured netlist truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .aes import AES128, BLOCK_BYTES
from .errors import ConfigError
from .host import (
    HostConfig,
    HostRun,
    TrafficModel,
    TriggerLog,
    generate_traffic,
    run_host,
)


@dataclass(frozen=True)
class Wire:
    wire_id: str
    x: int | None
    y: int | None
    module: str

    @property
    def placed(self) -> bool:
        return self.x is not None and self.y is not None


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    declared_wire_count: int
    bbox: tuple[int, int, int, int] | None = None  # x0, y0, x1, y1

    def __post_init__(self):
        if self.declared_wire_count < 0:
            raise ConfigError(f"module {self.name}: declared_wire_count must be >= 0")
        if self.bbox is not None:
            x0, y0, x1, y1 = self.bbox
            if x1 < x0 or y1 < y0:
                raise ConfigError(f"module {self.name}: malformed bbox {self.bbox}")


@dataclass(frozen=True)
class TriggerStateSet:
    label: str
    wire_ids: tuple[str, ...] = ()
    module_refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class TriggerQuad:
    d: int
    t: float
    alpha: float
    l: int

    def __post_init__(self):
        if self.d < 0 or self.t < 0 or self.l < 0:
            raise ValueError("d, t and l must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")

    def to_dict(self) -> dict:
        return {"d": self.d, "t": self.t, "alpha": self.alpha, "l": self.l}


@dataclass
class DesignGraph:
    wires: list[Wire]
    modules: list[ModuleDecl]
    trigger_sets: list[TriggerStateSet] = field(default_factory=list)

    def __post_init__(self):
        ids = [w.wire_id for w in self.wires]
        if len(set(ids)) != len(ids):
            raise ConfigError("wire ids must be unique")
        mod_names = {m.name for m in self.modules}
        placed_per_module: dict[str, int] = {}
        for w in self.wires:
            if w.module not in mod_names:
                raise ConfigError(f"wire {w.wire_id}: unknown module {w.module!r}")
            placed_per_module[w.module] = placed_per_module.get(w.module, 0) + 1
        for m in self.modules:
            if m.declared_wire_count < placed_per_module.get(m.name, 0):
                raise ConfigError(
                    f"module {m.name}: declares {m.declared_wire_count} wires but "
                    f"{placed_per_module[m.name]} are placed"
                )
        for ts in self.trigger_sets:
            self._resolve(ts)
        self._by_id = {w.wire_id: w for w in self.wires}
        self._by_name = {m.name: m for m in self.modules}

    def wire(self, wire_id: str) -> Wire:
        try:
            return self._by_id[wire_id]
        except KeyError:
            raise ConfigError(f"unknown wire id {wire_id!r}") from None

    def module(self, name: str) -> ModuleDecl:
        try:
            return self._by_name[name]
        except KeyError:
            raise ConfigError(f"unknown module {name!r}") from None

    def module_wires(self, name: str) -> list[Wire]:
        return [w for w in self.wires if w.module == name]

    def _resolve(self, trigger_set: TriggerStateSet) -> None:
        known_wires = {w.wire_id for w in self.wires}
        known_mods = {m.name for m in self.modules}
        for wid in trigger_set.wire_ids:
            if wid not in known_wires:
                raise ConfigError(
                    f"trigger set {trigger_set.label!r}: unknown wire {wid!r}"
                )
        for name in trigger_set.module_refs:
            if name not in known_mods:
                raise ConfigError(
                    f"trigger set {trigger_set.label!r}: unknown module {name!r}"
                )

    @classmethod
    def from_dict(cls, data: dict) -> "DesignGraph":
        try:
            modules = [
                ModuleDecl(
                    name=m["name"],
                    declared_wire_count=int(m["declared_wire_count"]),
                    bbox=tuple(int(v) for v in m["bbox"]) if m.get("bbox") else None,
                )
                for m in data["modules"]
            ]
            wires = [
                Wire(
                    wire_id=w["id"],
                    x=None if w.get("x") is None else int(w["x"]),
                    y=None if w.get("y") is None else int(w["y"]),
                    module=w["module"],
                )
                for w in data["wires"]
            ]
            trigger_sets = [
                TriggerStateSet(
                    label=ts["label"],
                    wire_ids=tuple(ts.get("wires", ())),
                    module_refs=tuple(ts.get("modules", ())),
                )
                for ts in data.get("trigger_sets", ())
            ]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed design graph: {exc}") from None
        return cls(wires=wires, modules=modules, trigger_sets=trigger_sets)

    def to_dict(self) -> dict:
        return {
            "modules": [
                {
                    "name": m.name,
                    "declared_wire_count": m.declared_wire_count,
                    "bbox": list(m.bbox) if m.bbox else None,
                }
                for m in self.modules
            ],
            "wires": [
                {"id": w.wire_id, "x": w.x, "y": w.y, "module": w.module}
                for w in self.wires
            ],
            "trigger_sets": [
                {
                    "label": ts.label,
                    "wires": list(ts.wire_ids),
                    "modules": list(ts.module_refs),
                }
                for ts in self.trigger_sets
            ],
        }


def load_design(path) -> DesignGraph:
    with open(path) as fh:
        return DesignGraph.from_dict(json.load(fh))


def shipped_design_path() -> str:
    """Path of the packaged example Trojan design graph."""
    return str(resources.files("scramleak").joinpath("data/trojan_design.json"))


def save_design(design: DesignGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(design.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def trigger_dimension(design: DesignGraph, trigger_set: TriggerStateSet) -> int:
    """Wire count of the set; module references count their declared total."""
    d = len(set(trigger_set.wire_ids))
    for name in trigger_set.module_refs:
        d += design.module(name).declared_wire_count
    return d


def trigger_locality(design: DesignGraph, trigger_set: TriggerStateSet) -> int:
    """Maximum pairwise Manhattan distance between the set's placements.

    Module references contribute their placed wires plus, when the module
    declares more wires than are placed, the bounding-box corners standing
    in for the unplaced remainder. Empty and singleton sets spread 0.
    """
    points: list[tuple[int, int]] = []
    for wid in trigger_set.wire_ids:
        w = design.wire(wid)
        if not w.placed:
            raise ConfigError(f"wire {wid!r} has no placement")
        points.append((w.x, w.y))
    for name in trigger_set.module_refs:
        mod = design.module(name)
        placed = [w for w in design.module_wires(name) if w.placed]
        points.extend((w.x, w.y) for w in placed)
        if mod.declared_wire_count > len(placed):
            if mod.bbox is None:
                raise ConfigError(
                    f"module {name!r} declares unplaced wires but has no bbox"
                )
            x0, y0, x1, y1 = mod.bbox
            points.extend([(x0, y0), (x0, y1), (x1, y0), (x1, y1)])
    if len(points) < 2:
        return 0
    xs = np.array([p[0] for p in points], dtype=np.int64)
    ys = np.array([p[1] for p in points], dtype=np.int64)
    # max Manhattan distance via the rotated frame: max over (x+y) and (x-y) ranges
    u = xs + ys
    v = xs - ys
    return int(max(u.max() - u.min(), v.max() - v.min()))


def payload_delay_min(key_len: int, window_len: int) -> int:
    """Cycles needed to leak the whole key over an uninterrupted idle line."""
    if key_len < 1 or window_len < 1:
        raise ValueError("key_len and window_len must be positive")
    return key_len * window_len


@dataclass(frozen=True)
class DelayMeasurement:
    status: str  # "measured", "incomplete", "never_triggered"
    cycles: int | None

    def as_number(self) -> float:
        return float(self.cycles) if self.cycles is not None else math.inf


def measure_payload_delay(trigger_log: TriggerLog, key_len: int) -> DelayMeasurement:
    """Cycles from the trigger instant until the key_len-th completed window."""
    if trigger_log.first_idle_cycle is None:
        return DelayMeasurement("never_triggered", None)
    if len(trigger_log.records) < key_len:
        return DelayMeasurement("incomplete", None)
    end_cycle = trigger_log.records[key_len - 1][0]
    return DelayMeasurement("measured", end_cycle - trigger_log.first_idle_cycle)


@dataclass
class SimulationSetup:
    """Bundle of everything a measurement simulation needs."""

    host_config: HostConfig
    traffic_model: TrafficModel
    n_cycles: int
    seed: int = 0


def golden_cipher_bits(run: HostRun, config: HostConfig) -> np.ndarray:
    """What a Trojan-free core would put on the busy cycles: AES of the inputs."""
    golden = AES128(config.key.key_bytes())
    if not run.plaintexts:
        return np.zeros(0, dtype=np.uint8)
    stacked = np.frombuffer(b"".join(run.plaintexts), dtype=np.uint8).reshape(
        -1, BLOCK_BYTES
    )
    return np.unpackbits(golden.encrypt_blocks(stacked))


def functional_correctness_oracle(run: HostRun, config: HostConfig) -> bool:
    """Flag iff the busy-cycle output differs from the golden ciphertext."""
    n_busy = int(run.busy.sum())
    if n_busy == 0:
        return False
    expected = golden_cipher_bits(run, config)[:n_busy]
    return not np.array_equal(run.bitstream[run.busy], expected)


def always_flagging_oracle(run: HostRun, config: HostConfig) -> bool:
    return True


def never_flagging_oracle(run: HostRun, config: HostConfig) -> bool:
    return False


ORACLES = {
    "functional": functional_correctness_oracle,
    "always_flag": always_flagging_oracle,
    "never_flag": never_flagging_oracle,
}


@dataclass(frozen=True)
class AlphaEstimate:
    alpha: float
    n_trials: int
    n_triggered: int
    n_flagged: int
    n_oracle_errors: int


def implicit_behavior_factor(
    setup: SimulationSetup, tester_oracle, n_trials: int, seed: int | None = None
) -> AlphaEstimate:
    """Monte-Carlo estimate of the no-explicit-manifestation probability.

    Each trial draws a fresh traffic trace, runs the host, and asks the
    oracle whether the run looks malicious. alpha is the fraction of
    triggered (>= one idle cycle) runs the oracle does not flag. Trials are
    independent; oracle exceptions are tallied and excluded. The per-trial
    seeds derive deterministically from `seed`, so results do not depend on
    execution order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if seed is None:
        seed = setup.seed
    trial_seeds = np.random.SeedSequence(seed).generate_state(n_trials, dtype=np.uint64)
    n_triggered = 0
    n_flagged = 0
    n_errors = 0
    for trial_seed in trial_seeds:
        trace = generate_traffic(setup.traffic_model, setup.n_cycles, int(trial_seed))
        run = run_host(setup.host_config, trace, setup.n_cycles)
        if run.trigger_log.first_idle_cycle is None:
            continue
        try:
            flagged = bool(tester_oracle(run, setup.host_config))
        except Exception:
            n_errors += 1
            continue
        n_triggered += 1
        if flagged:
            n_flagged += 1
    if n_triggered == 0:
        raise ValueError("no trial triggered the Trojan; cannot estimate alpha")
    return AlphaEstimate(
        alpha=1.0 - n_flagged / n_triggered,
        n_trials=n_trials,
        n_triggered=n_triggered + n_errors,
        n_flagged=n_flagged,
        n_oracle_errors=n_errors,
    )


def class_membership(region, bounds: TriggerQuad) -> bool:
    """True iff some quadruple in the region is componentwise <= the bounds."""
    region = list(region)
    if not region:
        raise ValueError("region must be non-empty")
    return any(
        q.d <= bounds.d and q.t <= bounds.t and q.alpha <= bounds.alpha and q.l <= bounds.l
        for q in region
    )


def achievable_region(
    design: DesignGraph,
    trigger_sets,
    setup: SimulationSetup,
    oracle=functional_correctness_oracle,
    alpha_trials: int = 64,
) -> list[TriggerQuad]:
    """One quadruple per trigger set.

    d and l come from the design graph; t and alpha come from one seeded
    simulation of `setup` (they are properties of the Trojan's behavior, so
    all sets share them). An incomplete key delivery maps to t = +inf.
    """
    trigger_sets = list(trigger_sets)
    if not trigger_sets:
        raise ValueError("need at least one trigger set")
    trace = generate_traffic(setup.traffic_model, setup.n_cycles, setup.seed)
    run = run_host(setup.host_config, trace, setup.n_cycles)
    delay = measure_payload_delay(run.trigger_log, setup.host_config.key.key_len)
    alpha = implicit_behavior_factor(setup, oracle, alpha_trials, setup.seed).alpha
    return [
        TriggerQuad(
            d=trigger_dimension(design, ts),
            t=delay.as_number(),
            alpha=alpha,
            l=trigger_locality(design, ts),
        )
        for ts in trigger_sets
    ]
