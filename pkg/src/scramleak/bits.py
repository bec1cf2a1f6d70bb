"""Bit-vector helpers and the packed bitstream file format.

Serialization convention used throughout: hex strings encode byte vectors,
and bit 0 of a vector is the most significant bit of the first byte
(MSB-first). Bitstream files are a little-endian u64 bit count followed by
the bits packed MSB-first into bytes.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError


def hex_to_bits(hex_str: str, n_bits: int | None = None) -> np.ndarray:
    """Decode a hex string into a uint8 bit array, MSB of first byte first."""
    try:
        raw = bytes.fromhex(hex_str)
    except ValueError as exc:
        raise ConfigError(f"invalid hex string {hex_str!r}: {exc}") from None
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if n_bits is not None and bits.size != n_bits:
        raise ConfigError(f"expected {n_bits} bits, got {bits.size} from {hex_str!r}")
    return bits


def bits_to_hex(bits) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError(f"bit count {bits.size} is not a multiple of 8")
    return np.packbits(bits).tobytes().hex()


def bits_to_int(bits) -> int:
    """Bit vector (position 0 first) -> integer with bit i at position i."""
    value = 0
    for i, b in enumerate(bits):
        if b:
            value |= 1 << i
    return value


def int_to_bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> i) & 1 for i in range(width))


def write_bitstream(path, bits) -> None:
    """Write bits as an 8-byte little-endian length header plus packed bytes."""
    bits = np.asarray(bits, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", bits.size))
        fh.write(np.packbits(bits).tobytes())


def read_bitstream(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ConfigError(f"{path}: truncated bitstream header")
        (n_bits,) = struct.unpack("<Q", header)
        payload = fh.read()
    expected = (n_bits + 7) // 8
    if len(payload) < expected:
        raise ConfigError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    packed = np.frombuffer(payload[:expected], dtype=np.uint8)
    return np.unpackbits(packed)[:n_bits]
