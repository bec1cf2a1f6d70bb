"""The adversary's key extractor.

A mirror LFSR with the transmitter's structure descrambles the tapped line.
During an idle window the transmitter sends key_bit XOR feedback, and once
the mirror register has absorbed `width` clean line bits its feedback term
is identical, so the descrambled estimate sits constant at the key bit:
a window summing to ~0 means '0', summing to ~window_len means '1'. The
thresholds leave slack for channel errors. Ciphertext windows descramble to
coin flips and land near window_len/2, which neither threshold accepts.

Window framing is the receiver's problem (no shared clock epoch): after a
detected bit the next window starts immediately; while verdicts come back
NonKey the window slides one cycle at a time until it locks onto a key
window again.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .lfsr import LfsrConfig, ScramblerState, descramble_step, descramble_stream


class Verdict(enum.Enum):
    BIT0 = "bit0"
    BIT1 = "bit1"
    NON_KEY = "non_key"


@dataclass(frozen=True)
class ExtractorConfig:
    lfsr: LfsrConfig = field(default_factory=LfsrConfig)
    window_len: int = 128
    lo_threshold: int = 3
    hi_threshold: int = 125
    key_len: int = 128

    def __post_init__(self):
        if not 0 <= self.lo_threshold < self.hi_threshold <= self.window_len:
            raise ValueError(
                "thresholds must satisfy 0 <= lo < hi <= window_len, got "
                f"lo={self.lo_threshold} hi={self.hi_threshold} window={self.window_len}"
            )
        if self.key_len < 1:
            raise ValueError(f"key_len must be >= 1, got {self.key_len}")


@dataclass(frozen=True)
class WindowVerdict:
    counter: int
    verdict: Verdict


@dataclass(frozen=True)
class ExtractorState:
    mirror: ScramblerState
    window_bits: tuple[int, ...] = ()
    window_counter: int = 0
    detected_bits: tuple[tuple[int, int], ...] = ()

    @property
    def window_pos(self) -> int:
        return len(self.window_bits)


def classify_window(counter: int, config: ExtractorConfig) -> WindowVerdict:
    """Threshold the mismatch counter of one full window (inclusive bounds)."""
    counter = int(counter)
    if not 0 <= counter <= config.window_len:
        raise ValueError(f"counter {counter} out of range [0, {config.window_len}]")
    if counter <= config.lo_threshold:
        verdict = Verdict.BIT0
    elif counter >= config.hi_threshold:
        verdict = Verdict.BIT1
    else:
        verdict = Verdict.NON_KEY
    return WindowVerdict(counter, verdict)


def extractor_reset(config: ExtractorConfig, mirror_register: int = 0) -> ExtractorState:
    return ExtractorState(mirror=ScramblerState(config.lfsr, mirror_register, 0))


def extractor_step(
    state: ExtractorState, received_bit: int, config: ExtractorConfig
) -> tuple[ExtractorState, WindowVerdict | None]:
    """Feed one line bit through the mirror; returns a verdict on full windows.

    The counter accumulates cycles whose descrambled estimate is 1 (the
    feedback/line mismatches). A Bit0/Bit1 verdict appends
    (window start offset, bit) to detected_bits and starts a fresh window;
    NonKey drops only the oldest cycle so the window slides by one.
    """
    est, mirror = descramble_step(state.mirror, received_bit)
    window = state.window_bits + (est,)
    counter = state.window_counter + est
    detected = state.detected_bits
    verdict = None
    if len(window) == config.window_len:
        verdict = classify_window(counter, config)
        if verdict.verdict is Verdict.NON_KEY:
            counter -= window[0]
            window = window[1:]
        else:
            start = mirror.cycle - config.window_len
            detected = detected + ((start, 0 if verdict.verdict is Verdict.BIT0 else 1),)
            window = ()
            counter = 0
    return (
        replace(
            state,
            mirror=mirror,
            window_bits=window,
            window_counter=counter,
            detected_bits=detected,
        ),
        verdict,
    )


@dataclass
class DetectionReport:
    """Everything recover_key learned from one stream."""

    status: str  # "ok" or "insufficient_windows"
    detected_bits: list[tuple[int, int]]
    n_bit0: int
    n_bit1: int
    n_nonkey: int
    counter_histogram: list[int]  # index = counter value, over every verdict
    key_estimate: np.ndarray | None
    vote_counts: list[tuple[int, int]]  # per key position: (votes for 0, votes for 1)
    uncovered_positions: list[int]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "detected_bits": [[int(o), int(b)] for o, b in self.detected_bits],
            "n_bit0": self.n_bit0,
            "n_bit1": self.n_bit1,
            "n_nonkey": self.n_nonkey,
            "counter_histogram": [int(c) for c in self.counter_histogram],
            "key_estimate_hex": None
            if self.key_estimate is None
            else np.packbits(self.key_estimate).tobytes().hex(),
            "vote_counts": [[int(a), int(b)] for a, b in self.vote_counts],
            "uncovered_positions": [int(p) for p in self.uncovered_positions],
        }


def _walk_windows(est: np.ndarray, config: ExtractorConfig):
    """Sliding/blockwise window walk over a precomputed estimate stream.

    Equivalent to feeding extractor_step bit by bit, but works off prefix
    sums so NonKey stretches cost O(1) per slide.
    """
    window = config.window_len
    lo, hi = config.lo_threshold, config.hi_threshold
    sums = np.concatenate([[0], np.cumsum(est, dtype=np.int64)])
    detected: list[tuple[int, int]] = []
    histogram = [0] * (window + 1)
    n_nonkey = 0
    p = 0
    limit = est.size - window
    while p <= limit:
        counter = int(sums[p + window] - sums[p])
        histogram[counter] += 1
        if counter <= lo:
            detected.append((p, 0))
            p += window
        elif counter >= hi:
            detected.append((p, 1))
            p += window
        else:
            n_nonkey += 1
            p += 1
    return detected, histogram, n_nonkey


def _vote(detected, config: ExtractorConfig):
    """Map detections to key positions and majority-vote each position.

    Offsets of consecutive detections are rounded to whole windows, so a
    dropped window shows up as a gap of ~2 windows and simply skips one key
    position instead of shifting everything after it. Positions are taken
    cyclically; the reported estimate is phased so that the stream start is
    key position 0.
    """
    window = config.window_len
    key_len = config.key_len
    votes = np.zeros((key_len, 2), dtype=np.int64)
    idx = round(detected[0][0] / window)
    votes[idx % key_len][detected[0][1]] += 1
    for j in range(1, len(detected)):
        gap = detected[j][0] - detected[j - 1][0]
        idx += max(1, round(gap / window))
        votes[idx % key_len][detected[j][1]] += 1
    estimate = (votes[:, 1] > votes[:, 0]).astype(np.uint8)
    uncovered = [int(i) for i in np.flatnonzero(votes.sum(axis=1) == 0)]
    return estimate, votes, uncovered


def recover_key(
    received_bits, config: ExtractorConfig, mirror_register: int = 0
) -> tuple[np.ndarray | None, DetectionReport]:
    """Run the extractor over a whole stream and reassemble the key.

    Returns (key_estimate, report); the estimate is None when fewer than
    key_len bits were detected ("insufficient_windows"). With repeated key
    passes in the stream, per-position majority voting rides out dropped
    windows.
    """
    est = descramble_stream(config.lfsr, received_bits, mirror_register)
    detected, histogram, n_nonkey = _walk_windows(est, config)
    n_bit0 = sum(1 for _, b in detected if b == 0)
    n_bit1 = len(detected) - n_bit0

    if len(detected) < config.key_len:
        report = DetectionReport(
            status="insufficient_windows",
            detected_bits=detected,
            n_bit0=n_bit0,
            n_bit1=n_bit1,
            n_nonkey=n_nonkey,
            counter_histogram=histogram,
            key_estimate=None,
            vote_counts=[(0, 0)] * config.key_len,
            uncovered_positions=list(range(config.key_len)),
        )
        return None, report

    estimate, votes, uncovered = _vote(detected, config)
    report = DetectionReport(
        status="ok",
        detected_bits=detected,
        n_bit0=n_bit0,
        n_bit1=n_bit1,
        n_nonkey=n_nonkey,
        counter_histogram=histogram,
        key_estimate=estimate,
        vote_counts=[(int(a), int(b)) for a, b in votes],
        uncovered_positions=uncovered,
    )
    return estimate, report
