"""AES-128 block encryption, table-driven, with a vectorized multi-block path.

Tables (S-box, GF(2^8) doubling) are derived at import time from the field
arithmetic rather than pasted in. Only encryption is provided; the simulator
never decrypts.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError

BLOCK_BYTES = 16
KEY_BYTES = 16
N_ROUNDS = 10


def _build_tables():
    # exp/log tables over GF(2^8) mod x^8+x^4+x^3+x+1, generator 0x03
    exp = [0] * 256
    log = [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x ^= (x << 1) ^ (0x11B if x & 0x80 else 0)
    exp[255] = exp[0]

    def affine(b):
        res = 0x63
        for shift in range(5):
            rot = ((b << shift) | (b >> (8 - shift))) & 0xFF
            res ^= rot
        return res

    sbox = [affine(0 if b == 0 else exp[255 - log[b]]) for b in range(256)]
    dbl = [((b << 1) ^ (0x1B if b & 0x80 else 0)) & 0xFF for b in range(256)]
    return (
        np.array(sbox, dtype=np.uint8),
        np.array(dbl, dtype=np.uint8),
    )


_SBOX, _X2 = _build_tables()
_X3 = _X2 ^ np.arange(256, dtype=np.uint8)
_RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)

# ShiftRows as a permutation of the 16-byte block (index r + 4c)
_SHIFT_ROWS = np.array(
    [(k % 4) + 4 * (((k // 4) + (k % 4)) % 4) for k in range(16)], dtype=np.intp
)


def expand_key(key: bytes) -> np.ndarray:
    """AES-128 key schedule: 11 round keys of 16 bytes each."""
    if len(key) != KEY_BYTES:
        raise ContractError(f"AES-128 key must be {KEY_BYTES} bytes, got {len(key)}")
    words = [list(key[4 * i : 4 * i + 4]) for i in range(4)]
    sbox = _SBOX.tolist()
    for i in range(4, 4 * (N_ROUNDS + 1)):
        temp = list(words[i - 1])
        if i % 4 == 0:
            temp = temp[1:] + temp[:1]
            temp = [sbox[b] for b in temp]
            temp[0] ^= _RCON[i // 4 - 1]
        words.append([a ^ b for a, b in zip(words[i - 4], temp)])
    flat = [b for w in words for b in w]
    return np.array(flat, dtype=np.uint8).reshape(N_ROUNDS + 1, 16)


def _mix_columns(state: np.ndarray) -> np.ndarray:
    # state shape (N, 4, 4) indexed [block, column, row]
    a0, a1, a2, a3 = (state[:, :, r] for r in range(4))
    return np.stack(
        [
            _X2[a0] ^ _X3[a1] ^ a2 ^ a3,
            a0 ^ _X2[a1] ^ _X3[a2] ^ a3,
            a0 ^ a1 ^ _X2[a2] ^ _X3[a3],
            _X3[a0] ^ a1 ^ a2 ^ _X2[a3],
        ],
        axis=2,
    )


class AES128:
    """Single-key AES-128 encryptor; the round keys are expanded once."""

    def __init__(self, key: bytes):
        self.key = bytes(key)
        self._round_keys = expand_key(self.key)

    def encrypt_blocks(self, blocks: np.ndarray) -> np.ndarray:
        """Encrypt an (N, 16) uint8 array of blocks in one vectorized pass."""
        blocks = np.asarray(blocks, dtype=np.uint8)
        if blocks.ndim != 2 or blocks.shape[1] != BLOCK_BYTES:
            raise ContractError(f"blocks must have shape (N, 16), got {blocks.shape}")
        state = blocks ^ self._round_keys[0]
        for rnd in range(1, N_ROUNDS + 1):
            state = _SBOX[state]
            state = state[:, _SHIFT_ROWS]
            if rnd < N_ROUNDS:
                state = _mix_columns(state.reshape(-1, 4, 4)).reshape(-1, 16)
            state = state ^ self._round_keys[rnd]
        return state

    def encrypt_block(self, plaintext: bytes) -> bytes:
        if len(plaintext) != BLOCK_BYTES:
            raise ContractError(
                f"plaintext block must be {BLOCK_BYTES} bytes, got {len(plaintext)}"
            )
        block = np.frombuffer(plaintext, dtype=np.uint8).reshape(1, 16)
        return self.encrypt_blocks(block).tobytes()


def encrypt_block(key: bytes, plaintext: bytes) -> bytes:
    """One-shot AES-128 single-block encryption."""
    return AES128(key).encrypt_block(plaintext)
