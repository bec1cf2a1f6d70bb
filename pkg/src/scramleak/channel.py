"""Memoryless binary symmetric channel between output pin and receiver.

The flip mask comes from numpy's Philox counter-based generator, so a
(flip_prob, seed) pair always reproduces the same mask; applying the same
channel twice therefore restores the input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelModel:
    flip_prob: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must be in [0, 1], got {self.flip_prob}")


def apply_channel(bits, model: ChannelModel) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    if model.flip_prob == 0.0:
        return bits.copy()
    rng = np.random.Generator(np.random.Philox(model.seed))
    mask = rng.random(bits.size) < model.flip_prob
    return bits ^ mask.astype(np.uint8)
