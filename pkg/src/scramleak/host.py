"""The Trojan-bearing IP core: cipher path, output mux, covert key sequencer.

One output bit leaves the core per clock cycle. While user data is present
(`line busy`) the mux passes serialized ciphertext; while the line is idle
the core scrambles the current key bit instead, and after `window_len`
consecutive idle cycles that key bit has been fully leaked and the
sequencer moves to the next one (wrapping past the end, so the key is
re-leaked forever). Any busy cycle resets the window: a partially leaked
bit is retried from scratch at the next idle run.

In both modes the emitted bit is shifted back into the scrambler register,
which keeps a line-driven descrambler synchronized across traffic-mode
changes.

The cipher engine is pluggable: anything with ``encrypt_block(bytes) ->
bytes`` works (``encrypt_blocks`` for the vectorized path is optional);
AES-128 is the default and the one the Trojan actually leaks the key of.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .aes import AES128, BLOCK_BYTES
from .bits import hex_to_bits
from .errors import ContractError
from .lfsr import LfsrConfig, ScramblerState, scramble_step, shift_in

CIPHER_BLOCK_BITS = 8 * BLOCK_BYTES
DEFAULT_KEY_HEX = "2b7e151628aed2a6abf7158809cf4f3c"


@dataclass(frozen=True)
class KeyMaterial:
    """The secret key bits and the sequencer's position in them."""

    key_bits: tuple[int, ...]
    next_index: int = 0

    def __post_init__(self):
        if not self.key_bits:
            raise ValueError("key_bits must be non-empty")
        if not 0 <= self.next_index < len(self.key_bits):
            raise ValueError(f"next_index {self.next_index} out of range")

    @classmethod
    def from_hex(cls, key_hex: str) -> "KeyMaterial":
        return cls(tuple(int(b) for b in hex_to_bits(key_hex)))

    @property
    def key_len(self) -> int:
        return len(self.key_bits)

    def key_bytes(self) -> bytes:
        return np.packbits(np.array(self.key_bits, dtype=np.uint8)).tobytes()


@dataclass(frozen=True)
class TrafficModel:
    """Bursty input-data model: alternating busy/idle runs with geometric lengths.

    busy_prob is the stationary busy fraction; burst_len_mean the mean busy
    run length. Idle runs then average burst_len_mean * (1-p)/p cycles. Run
    lengths are at least one cycle, so probabilities very close to 0 or 1
    saturate accordingly.
    """

    busy_prob: float = 0.0
    burst_len_mean: float = 256.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.busy_prob <= 1.0:
            raise ValueError(f"busy_prob must be in [0, 1], got {self.busy_prob}")
        if self.burst_len_mean < 1.0:
            raise ValueError(f"burst_len_mean must be >= 1, got {self.burst_len_mean}")


@dataclass
class HostConfig:
    key: KeyMaterial
    lfsr: LfsrConfig = field(default_factory=LfsrConfig)
    window_len: int = 128
    cipher: object | None = None
    initial_register: int = 0

    def __post_init__(self):
        if self.window_len < 1:
            raise ValueError(f"window_len must be >= 1, got {self.window_len}")
        if self.cipher is None:
            self.cipher = AES128(self.key.key_bytes())

    @classmethod
    def from_key_hex(cls, key_hex: str = DEFAULT_KEY_HEX, **kwargs) -> "HostConfig":
        return cls(key=KeyMaterial.from_hex(key_hex), **kwargs)


@dataclass(frozen=True)
class HostState:
    config: HostConfig
    scrambler: ScramblerState
    key: KeyMaterial
    window_progress: int = 0
    pending_cipher_bits: tuple[int, ...] = ()
    trigger_log: tuple[tuple[int, int], ...] = ()


@dataclass
class TriggerLog:
    """Completed-window records plus the trigger epoch.

    records holds one (end_cycle, key_index) pair per completed key window,
    where end_cycle counts cycles processed when the window closed (so the
    first all-idle window of a 128-cycle config ends at 128). The trigger
    instant is the first idle output cycle, None if the line never idled.
    """

    first_idle_cycle: int | None
    records: list[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class TrafficTrace:
    busy: np.ndarray
    plaintexts: tuple[bytes, ...] = ()


@dataclass
class HostRun:
    bitstream: np.ndarray
    trigger_log: TriggerLog
    busy: np.ndarray
    plaintexts: tuple[bytes, ...]


def host_reset(config: HostConfig) -> HostState:
    return HostState(
        config=config,
        scrambler=ScramblerState(config.lfsr, config.initial_register, 0),
        key=config.key,
    )


def host_step(
    state: HostState, line_busy: bool, next_plaintext_block: bytes | None = None
) -> tuple[int, HostState]:
    """Advance the core one clock cycle and return the emitted bit.

    A busy cycle pops one ciphertext bit from the serializer, encrypting
    `next_plaintext_block` first when the serializer is empty. An idle cycle
    scrambles the current key bit and advances the leak window.
    """
    cfg = state.config
    if line_busy:
        pending = state.pending_cipher_bits
        if not pending:
            if next_plaintext_block is None:
                raise ContractError(
                    f"cycle {state.scrambler.cycle}: line busy, cipher queue empty "
                    "and no plaintext block supplied"
                )
            ct = cfg.cipher.encrypt_block(bytes(next_plaintext_block))
            pending = tuple(np.unpackbits(np.frombuffer(ct, dtype=np.uint8)).tolist())
        out = pending[0]
        new_state = replace(
            state,
            scrambler=shift_in(state.scrambler, out),
            pending_cipher_bits=pending[1:],
            window_progress=0,
        )
        return out, new_state

    key = state.key
    out, scr = scramble_step(state.scrambler, key.key_bits[key.next_index])
    progress = state.window_progress + 1
    log = state.trigger_log
    if progress == cfg.window_len:
        log = log + ((scr.cycle, key.next_index),)
        key = replace(key, next_index=(key.next_index + 1) % key.key_len)
        progress = 0
    return out, replace(
        state, scrambler=scr, key=key, window_progress=progress, trigger_log=log
    )


def generate_traffic(model: TrafficModel, n_cycles: int, seed: int | None = None) -> TrafficTrace:
    """Deterministic busy/idle trace plus enough plaintext blocks to cover it."""
    if seed is None:
        seed = model.seed
    rng = np.random.Generator(np.random.Philox(seed))
    p = model.busy_prob
    if p <= 0.0:
        busy = np.zeros(n_cycles, dtype=bool)
    elif p >= 1.0:
        busy = np.ones(n_cycles, dtype=bool)
    else:
        busy_mean = model.burst_len_mean
        idle_mean = max(1.0, busy_mean * (1.0 - p) / p)
        runs = []
        total = 0
        state = bool(rng.random() < p)
        while total < n_cycles:
            mean = busy_mean if state else idle_mean
            length = int(rng.geometric(1.0 / mean))
            runs.append((state, length))
            total += length
            state = not state
        busy = np.empty(total, dtype=bool)
        pos = 0
        for s, length in runs:
            busy[pos : pos + length] = s
            pos += length
        busy = busy[:n_cycles]
    n_blocks = math.ceil(int(busy.sum()) / CIPHER_BLOCK_BITS)
    plaintexts = tuple(
        rng.integers(0, 256, BLOCK_BYTES, dtype=np.uint8).tobytes() for _ in range(n_blocks)
    )
    return TrafficTrace(busy=busy, plaintexts=plaintexts)


def _cipher_bits_for(config: HostConfig, plaintexts, n_blocks: int) -> list[int]:
    if n_blocks == 0:
        return []
    if len(plaintexts) < n_blocks:
        raise ContractError(
            f"trace provides {len(plaintexts)} plaintext blocks, run needs {n_blocks}"
        )
    for i, block in enumerate(plaintexts[:n_blocks]):
        if len(block) != BLOCK_BYTES:
            raise ContractError(f"plaintext block {i} has {len(block)} bytes, want {BLOCK_BYTES}")
    stacked = np.frombuffer(b"".join(plaintexts[:n_blocks]), dtype=np.uint8).reshape(
        n_blocks, BLOCK_BYTES
    )
    cipher = config.cipher
    if hasattr(cipher, "encrypt_blocks"):
        ct = cipher.encrypt_blocks(stacked)
    else:
        ct = np.frombuffer(
            b"".join(cipher.encrypt_block(row.tobytes()) for row in stacked), dtype=np.uint8
        ).reshape(n_blocks, BLOCK_BYTES)
    return np.unpackbits(np.asarray(ct, dtype=np.uint8)).tolist()


def run_host(config: HostConfig, trace: TrafficTrace, n_cycles: int) -> HostRun:
    """Cycle-accurate simulation of the host over the first n_cycles of the trace.

    Bit-identical to iterating host_step from host_reset, but runs the inner
    loop on machine ints for speed.
    """
    busy_arr = np.asarray(trace.busy, dtype=bool)
    if busy_arr.size < n_cycles:
        raise ContractError(f"trace has {busy_arr.size} cycles, run needs {n_cycles}")
    busy_arr = busy_arr[:n_cycles]
    n_busy = int(busy_arr.sum())
    n_blocks = math.ceil(n_busy / CIPHER_BLOCK_BITS)
    cipher_bits = _cipher_bits_for(config, trace.plaintexts, n_blocks)

    lfsr = config.lfsr
    tap_mask = lfsr.tap_mask
    full_mask = lfsr.register_mask
    reg = config.initial_register
    key_bits = list(config.key.key_bits)
    key_len = len(key_bits)
    ki = config.key.next_index
    window_len = config.window_len
    progress = 0
    ci = 0
    first_idle = -1
    records: list[tuple[int, int]] = []
    out = np.empty(n_cycles, dtype=np.uint8)
    busy_list = busy_arr.tolist()
    bit_count = int.bit_count

    for t in range(n_cycles):
        if busy_list[t]:
            o = cipher_bits[ci]
            ci += 1
            progress = 0
        else:
            if first_idle < 0:
                first_idle = t
            o = key_bits[ki] ^ (bit_count(reg & tap_mask) & 1)
            progress += 1
            if progress == window_len:
                records.append((t + 1, ki))
                ki = (ki + 1) % key_len
                progress = 0
        out[t] = o
        reg = ((reg << 1) | o) & full_mask

    log = TriggerLog(first_idle if first_idle >= 0 else None, records)
    return HostRun(
        bitstream=out,
        trigger_log=log,
        busy=busy_arr,
        plaintexts=tuple(trace.plaintexts[:n_blocks]),
    )
