import numpy as np
import pytest

from conftest import StubCipher
from scramleak import (
    HostConfig,
    KeyMaterial,
    LfsrConfig,
    TrafficModel,
    TrafficTrace,
    descramble_stream,
    generate_traffic,
    host_reset,
    host_step,
    run_host,
)
from scramleak.errors import ContractError

ALL_IDLE = TrafficModel(busy_prob=0.0)


def idle_trace(n):
    return TrafficTrace(busy=np.zeros(n, dtype=bool))


def step_through(config, trace, n_cycles):
    """Reference: drive host_step cycle by cycle, feeding plaintexts on demand."""
    state = host_reset(config)
    outputs = []
    blocks = list(trace.plaintexts)
    busy = np.asarray(trace.busy, dtype=bool)
    for t in range(n_cycles):
        block = None
        if busy[t] and not state.pending_cipher_bits:
            block = blocks.pop(0)
        out, state = host_step(state, bool(busy[t]), block)
        outputs.append(out)
    return np.array(outputs, dtype=np.uint8), state


def test_idle_step_examples(default_host_config):
    cfg = default_host_config
    state = host_reset(cfg)
    # default key 2b... starts 0,0,1: zero register feedback is 0
    out, state = host_step(state, False)
    assert (out, state.window_progress) == (0, 1)
    out, state = host_step(state, False)
    assert out == 0
    out, state = host_step(state, False)
    assert (out, state.window_progress) == (1, 3)


def test_mux_passthrough(default_host_config):
    from dataclasses import replace

    state = replace(host_reset(default_host_config), pending_cipher_bits=(1, 0, 1))
    outs = []
    for _ in range(3):
        out, state = host_step(state, True)
        outs.append(out)
    assert outs == [1, 0, 1]
    assert state.window_progress == 0


def test_missing_plaintext_is_contract_error(default_host_config):
    state = host_reset(default_host_config)
    with pytest.raises(ContractError):
        host_step(state, True, None)


def test_all_idle_run_completes_every_window(default_host_config):
    run = run_host(default_host_config, idle_trace(16384), 16384)
    log = run.trigger_log
    assert log.first_idle_cycle == 0
    assert len(log.records) == 128
    assert [ki for _, ki in log.records] == list(range(128))
    assert [end for end, _ in log.records] == [128 * (i + 1) for i in range(128)]


def test_all_busy_run_never_triggers(default_host_config):
    trace = generate_traffic(TrafficModel(busy_prob=1.0), 2000, seed=0)
    run = run_host(default_host_config, trace, 2000)
    assert run.trigger_log.first_idle_cycle is None
    assert len(run.trigger_log.records) == 0


def test_single_busy_cycle_aborts_window(default_host_config):
    # busy at cycle 60: the window in progress restarts, same key bit retried,
    # and its last cycle lands at 60 + 128
    busy = np.zeros(400, dtype=bool)
    busy[60] = True
    trace = TrafficTrace(busy=busy, plaintexts=(bytes(range(16)),))
    run = run_host(default_host_config, trace, 400)
    end_cycle, key_index = run.trigger_log.records[0]
    assert key_index == 0
    assert end_cycle - 1 == 60 + 128


def test_window_contiguity(stub_host_config):
    trace = generate_traffic(TrafficModel(busy_prob=0.4, burst_len_mean=32, seed=3), 60_000)
    run = run_host(stub_host_config, trace, 60_000)
    assert len(run.trigger_log.records) > 0
    for end, _ in run.trigger_log.records:
        window = run.busy[end - stub_host_config.window_len : end]
        assert not window.any()


def test_key_sequencing_cycles_forever():
    key = KeyMaterial(key_bits=(1, 0, 1, 1))
    cfg = HostConfig(key=key, lfsr=LfsrConfig(width=4, taps=(0, 3)), window_len=8,
                     cipher=StubCipher(b"\x01" * 16))
    run = run_host(cfg, idle_trace(100), 100)
    indices = [ki for _, ki in run.trigger_log.records]
    assert indices == [i % 4 for i in range(len(indices))]
    assert len(indices) == 100 // 8


def test_idle_window_algebra(default_host_config):
    # a synchronized descrambler sees the leaked key bit on every window cycle
    cfg = default_host_config
    run = run_host(cfg, idle_trace(16384), 16384)
    est = descramble_stream(cfg.lfsr, run.bitstream, cfg.initial_register)
    for end, ki in run.trigger_log.records:
        window = est[end - cfg.window_len : end]
        assert (window == cfg.key.key_bits[ki]).all()


def test_run_host_deterministic(stub_host_config):
    trace = generate_traffic(TrafficModel(busy_prob=0.5, burst_len_mean=16, seed=1), 20_000)
    a = run_host(stub_host_config, trace, 20_000)
    b = run_host(stub_host_config, trace, 20_000)
    assert np.array_equal(a.bitstream, b.bitstream)
    assert a.trigger_log.records == b.trigger_log.records


def test_run_host_matches_host_step(stub_host_config):
    trace = generate_traffic(TrafficModel(busy_prob=0.5, burst_len_mean=16, seed=8), 3000)
    fast = run_host(stub_host_config, trace, 3000)
    slow_bits, slow_state = step_through(stub_host_config, trace, 3000)
    assert np.array_equal(fast.bitstream, slow_bits)
    assert list(slow_state.trigger_log) == fast.trigger_log.records


def test_run_host_matches_host_step_with_aes(default_host_config):
    trace = generate_traffic(TrafficModel(busy_prob=0.3, burst_len_mean=8, seed=2), 600)
    fast = run_host(default_host_config, trace, 600)
    slow_bits, _ = step_through(default_host_config, trace, 600)
    assert np.array_equal(fast.bitstream, slow_bits)


def test_generate_traffic_extremes():
    assert not generate_traffic(TrafficModel(busy_prob=0.0), 1000, seed=0).busy.any()
    assert generate_traffic(TrafficModel(busy_prob=1.0), 1000, seed=0).busy.all()


def test_generate_traffic_busy_fraction():
    trace = generate_traffic(TrafficModel(busy_prob=0.5, burst_len_mean=2.0, seed=4), 100_000)
    fraction = trace.busy.mean()
    assert abs(fraction - 0.5) <= 0.01, fraction


def test_generate_traffic_deterministic():
    model = TrafficModel(busy_prob=0.3, burst_len_mean=10, seed=5)
    a = generate_traffic(model, 5000)
    b = generate_traffic(model, 5000)
    assert np.array_equal(a.busy, b.busy)
    assert a.plaintexts == b.plaintexts


def test_generate_traffic_supplies_enough_blocks(default_host_config):
    trace = generate_traffic(TrafficModel(busy_prob=0.9, burst_len_mean=64, seed=6), 10_000)
    run = run_host(default_host_config, trace, 10_000)  # must not raise
    assert run.bitstream.size == 10_000


def test_short_trace_rejected(default_host_config):
    with pytest.raises(ContractError):
        run_host(default_host_config, idle_trace(100), 200)


def test_missing_plaintexts_rejected(default_host_config):
    trace = TrafficTrace(busy=np.ones(300, dtype=bool), plaintexts=(bytes(16),))
    with pytest.raises(ContractError):
        run_host(default_host_config, trace, 300)


def test_traffic_model_validation():
    with pytest.raises(ValueError):
        TrafficModel(busy_prob=1.2)
    with pytest.raises(ValueError):
        TrafficModel(busy_prob=0.5, burst_len_mean=0.5)
