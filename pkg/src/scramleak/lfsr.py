"""Bit-serial multiplicative (self-synchronizing) scrambler on an LFSR.

Register frame: position 0 holds the most recently shifted-in bit and tap
indices refer to this frame. States store the register as a plain integer
with bit i = position i, which keeps the step functions cheap and the
states hashable/immutable.

The scrambler feeds its own *output* back into the register; the
descrambler shifts in the *received* bit instead. Driving the receive
register from the line is what makes the pair self-synchronizing: after
`width` clean bits both registers hold the same last-`width` line bits, so
the feedback terms cancel and the descrambler output equals the payload.
The price is error multiplication: one flipped line bit disturbs the
estimate once directly and once per feedback tap, i.e. (1 + |taps|) cycles.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import bits_to_int, int_to_bits

DEFAULT_WIDTH = 128
# x^128 + x^7 + x^2 + x + 1 in the shift-in frame: low-weight and full width,
# so feedback spans the whole register. Fully configurable per run.
DEFAULT_TAPS = (0, 1, 6, 127)


@dataclass(frozen=True)
class LfsrConfig:
    """Feedback tap set for a `width`-bit shift register."""

    width: int = DEFAULT_WIDTH
    taps: tuple[int, ...] = DEFAULT_TAPS

    def __post_init__(self):
        if self.width < 2:
            raise ValueError(f"width must be >= 2, got {self.width}")
        taps = tuple(sorted(set(int(t) for t in self.taps)))
        if not taps:
            raise ValueError("taps must be non-empty")
        if len(taps) != len(self.taps):
            raise ValueError(f"tap positions must be distinct, got {self.taps}")
        if taps[0] < 0 or taps[-1] >= self.width:
            raise ValueError(f"taps {taps} out of range for width {self.width}")
        object.__setattr__(self, "taps", taps)

    @property
    def tap_mask(self) -> int:
        mask = 0
        for t in self.taps:
            mask |= 1 << t
        return mask

    @property
    def register_mask(self) -> int:
        return (1 << self.width) - 1


@dataclass(frozen=True)
class ScramblerState:
    config: LfsrConfig
    register: int = 0
    cycle: int = 0

    def __post_init__(self):
        if not 0 <= self.register <= self.config.register_mask:
            raise ValueError(f"register value does not fit in {self.config.width} bits")

    @classmethod
    def from_bits(cls, config: LfsrConfig, register_bits, cycle: int = 0) -> "ScramblerState":
        register_bits = tuple(int(b) for b in register_bits)
        if len(register_bits) != config.width:
            raise ValueError(
                f"register length {len(register_bits)} != width {config.width}"
            )
        return cls(config, bits_to_int(register_bits), cycle)

    def register_bits(self) -> tuple[int, ...]:
        return int_to_bits(self.register, self.config.width)


def _register_as_int(config: LfsrConfig, register) -> int:
    if isinstance(register, (int, np.integer)):
        value = int(register)
        if not 0 <= value <= config.register_mask:
            raise ValueError(f"register value does not fit in {config.width} bits")
        return value
    register = tuple(int(b) for b in register)
    if len(register) != config.width:
        raise ValueError(f"register length {len(register)} != width {config.width}")
    return bits_to_int(register)


def lfsr_feedback(config: LfsrConfig, register) -> int:
    """XOR of the register bits at the tap positions. Register is not changed."""
    value = _register_as_int(config, register)
    return (value & config.tap_mask).bit_count() & 1


def shift_in(state: ScramblerState, bit: int) -> ScramblerState:
    """Shift `bit` into position 0, dropping the oldest bit."""
    cfg = state.config
    return ScramblerState(
        cfg,
        ((state.register << 1) | (bit & 1)) & cfg.register_mask,
        state.cycle + 1,
    )


def scramble_step(state: ScramblerState, payload_bit: int) -> tuple[int, ScramblerState]:
    """Transmit one bit: output = payload XOR feedback, output fed back."""
    out = (int(payload_bit) & 1) ^ lfsr_feedback(state.config, state.register)
    return out, shift_in(state, out)


def descramble_step(state: ScramblerState, received_bit: int) -> tuple[int, ScramblerState]:
    """Receive one bit: estimate = received XOR feedback, received bit fed back."""
    rx = int(received_bit) & 1
    est = rx ^ lfsr_feedback(state.config, state.register)
    return est, shift_in(state, rx)


def scramble_stream(config: LfsrConfig, payload_bits, register: int = 0) -> np.ndarray:
    """Scramble a whole payload sequence starting from `register`.

    Sequential by nature (the feedback depends on earlier outputs); the loop
    runs on machine ints and handles ~4M cycles/s, which covers every
    scenario in the test and acceptance suites.
    """
    reg = _register_as_int(config, register)
    tap_mask = config.tap_mask
    full_mask = config.register_mask
    payload = np.asarray(payload_bits, dtype=np.uint8).tolist()
    out = np.empty(len(payload), dtype=np.uint8)
    bit_count = int.bit_count
    for i, b in enumerate(payload):
        o = b ^ (bit_count(reg & tap_mask) & 1)
        out[i] = o
        reg = ((reg << 1) | o) & full_mask
    return out


def descramble_stream(config: LfsrConfig, received_bits, register: int = 0) -> np.ndarray:
    """Vectorized descrambler: estimate(t) = rx(t) XOR rx(t-tap-1) over all taps.

    The receive register only ever holds the last `width` received bits, so
    the whole estimate sequence is a fixed XOR combination of shifted copies
    of the received stream, with the initial register providing the
    negative-time prefix.
    """
    reg = _register_as_int(config, register)
    rx = np.ascontiguousarray(np.asarray(received_bits, dtype=np.uint8) & 1)
    w = config.width
    # prefix[j] is the bit "received" at time j - w: register position w-1-j
    prefix = np.array([(reg >> (w - 1 - j)) & 1 for j in range(w)], dtype=np.uint8)
    padded = np.concatenate([prefix, rx])
    est = rx.copy()
    n = rx.size
    for tap in config.taps:
        start = w - tap - 1
        est ^= padded[start : start + n]
    return est
