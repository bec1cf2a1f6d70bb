import numpy as np
import pytest

from scramleak import HostConfig, KeyMaterial, LfsrConfig


class StubCipher:
    """Cheap keyed byte permutation standing in for AES in host tests.

    Only the block-cipher surface matters (deterministic, 16 bytes in/out);
    deliberately provides encrypt_block only, to exercise the fallback path.
    """

    def __init__(self, key: bytes):
        self.key = bytes(key)

    def encrypt_block(self, plaintext: bytes) -> bytes:
        assert len(plaintext) == 16
        rot = self.key[0] % 16
        mixed = bytes(b ^ k for b, k in zip(plaintext, self.key))
        return mixed[rot:] + mixed[:rot]


def naive_scramble(config: LfsrConfig, register_bits, payload):
    """List-based reference scrambler, written independently of the package."""
    reg = list(register_bits)
    out = []
    for b in payload:
        fb = 0
        for t in config.taps:
            fb ^= reg[t]
        o = (int(b) & 1) ^ fb
        out.append(o)
        reg = [o] + reg[:-1]
    return out, reg


def naive_descramble(config: LfsrConfig, register_bits, received):
    reg = list(register_bits)
    out = []
    for b in received:
        fb = 0
        for t in config.taps:
            fb ^= reg[t]
        rx = int(b) & 1
        out.append(rx ^ fb)
        reg = [rx] + reg[:-1]
    return out, reg


@pytest.fixture
def default_host_config():
    return HostConfig.from_key_hex()


@pytest.fixture
def stub_host_config():
    key = KeyMaterial.from_hex("0f1e2d3c4b5a69788796a5b4c3d2e1f0")
    return HostConfig(key=key, cipher=StubCipher(key.key_bytes()))
