import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from scramleak import AES128, encrypt_block
from scramleak.errors import ContractError

STD_KEY = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
STD_PT = bytes.fromhex("00112233445566778899aabbccddeeff")
STD_CT = bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a")


def reference_encrypt(key: bytes, pt: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(pt) + enc.finalize()


def test_standard_vector():
    assert encrypt_block(STD_KEY, STD_PT) == STD_CT


def test_determinism():
    aes = AES128(STD_KEY)
    assert aes.encrypt_block(STD_PT) == aes.encrypt_block(STD_PT)


def test_distinct_plaintexts_distinct_ciphertexts():
    aes = AES128(STD_KEY)
    other = bytes(16)
    assert aes.encrypt_block(STD_PT) != aes.encrypt_block(other)


def test_cross_check_against_reference():
    rng = np.random.default_rng(99)
    for _ in range(20):
        key = rng.integers(0, 256, 16, dtype=np.uint8).tobytes()
        pt = rng.integers(0, 256, 16, dtype=np.uint8).tobytes()
        assert encrypt_block(key, pt) == reference_encrypt(key, pt)


def test_batch_matches_scalar():
    rng = np.random.default_rng(5)
    key = rng.integers(0, 256, 16, dtype=np.uint8).tobytes()
    blocks = rng.integers(0, 256, (50, 16), dtype=np.uint8)
    aes = AES128(key)
    batch = aes.encrypt_blocks(blocks)
    for i in range(blocks.shape[0]):
        assert batch[i].tobytes() == aes.encrypt_block(blocks[i].tobytes())


def test_block_size_errors():
    aes = AES128(STD_KEY)
    with pytest.raises(ContractError):
        aes.encrypt_block(b"short")
    with pytest.raises(ContractError):
        AES128(b"badkey")
    with pytest.raises(ContractError):
        aes.encrypt_blocks(np.zeros((2, 8), dtype=np.uint8))
